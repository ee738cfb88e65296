"""Tests for the masked MAE and heteroscedastic Gaussian losses."""

import math

import numpy as np
import pytest

from hyperforecast.core.gradcheck import analytic_gradients
from hyperforecast.core.tensor import constant, parameter
from hyperforecast.errors import ConfigError, EmptyMask, ShapeMismatch
from hyperforecast.models.forecast import ModelOutput
from hyperforecast.services.forecaster_service import compute_loss, gaussian_nll_loss, mae_loss


class TestMaeLoss:
    def test_perfect(self):
        assert mae_loss(constant(np.zeros((2, 3))), np.zeros((2, 3))).item() == 0.0

    def test_unit_error(self):
        assert mae_loss(constant(np.zeros((2, 3))), np.ones((2, 3))).item() == pytest.approx(1.0)

    def test_masked_entries_excluded(self):
        loss = mae_loss(constant([0.0, 0.0]), [1.0, 5.0], mask=[1.0, 0.0])
        assert loss.item() == pytest.approx(1.0)

    def test_masked_targets_do_not_matter(self):
        pred = constant(np.random.default_rng(0).normal(size=(2, 4, 3, 1)))
        target = np.random.default_rng(1).normal(size=(2, 4, 3, 1))
        mask = np.ones_like(target)
        mask[1, 2] = 0.0
        changed = target.copy()
        changed[1, 2] = 1e6
        assert mae_loss(pred, target, mask).item() == mae_loss(pred, changed, mask).item()

    def test_masked_entries_get_no_gradient(self):
        pred = parameter([0.5, 2.0])
        grads = analytic_gradients(lambda p: mae_loss(p, [0.0, 0.0], [1.0, 0.0]), pred)
        np.testing.assert_allclose(grads[0], [1.0, 0.0])

    def test_empty_mask(self):
        with pytest.raises(EmptyMask):
            mae_loss(constant([1.0]), [0.0], mask=[0.0])

    def test_shape_checked(self):
        with pytest.raises(ShapeMismatch):
            mae_loss(constant([1.0, 2.0]), [1.0])


class TestGaussianNll:
    def test_zero_residual_unit_variance(self):
        loss = gaussian_nll_loss(constant([0.0]), constant([0.0]), [0.0])
        assert loss.item() == pytest.approx(0.0)

    def test_log_variance_term(self):
        loss = gaussian_nll_loss(constant([0.0]), constant([2.0]), [0.0])
        assert loss.item() == pytest.approx(1.0)

    def test_residual_term(self):
        loss = gaussian_nll_loss(constant([0.0]), constant([0.0]), [1.0])
        assert loss.item() == pytest.approx(0.5)

    def test_masked_targets_do_not_matter(self):
        mu = constant([0.1, 0.2, 0.3])
        logvar = constant([0.0, -1.0, 1.0])
        mask = [1.0, 0.0, 1.0]
        a = gaussian_nll_loss(mu, logvar, [0.0, 0.0, 0.0], mask).item()
        b = gaussian_nll_loss(mu, logvar, [0.0, 1e6, 0.0], mask).item()
        assert a == b

    def test_variance_gradient_vanishes_at_matched_spread(self):
        # d/dlogvar of logvar/2 + r²/(2 e^logvar) is zero when e^logvar = r²
        logvar = parameter([np.log(4.0)])
        grads = analytic_gradients(lambda lv: gaussian_nll_loss(constant([0.0]), lv, [2.0]), logvar)
        np.testing.assert_allclose(grads[0], [0.0], atol=1e-12)

    def test_logvar_shape_checked(self):
        with pytest.raises(ShapeMismatch):
            gaussian_nll_loss(constant([0.0, 0.0]), constant([0.0]), [0.0, 0.0])


class TestComputeLoss:
    def test_mae_by_default(self):
        out = ModelOutput(mu=constant([1.0, 3.0]))
        assert compute_loss(out, [0.0, 0.0], None, "mae").item() == pytest.approx(2.0)

    def test_gaussian_needs_variance_head(self):
        with pytest.raises(ConfigError):
            compute_loss(ModelOutput(mu=constant([1.0])), [0.0], None, "gaussian_nll")

    def test_gaussian(self):
        out = ModelOutput(mu=constant([0.0]), logvar=constant([2.0]))
        assert compute_loss(out, [0.0], None, "gaussian_nll").item() == pytest.approx(1.0)


def _loop_mae(pred, target, mask):
    total, count = 0.0, 0
    for p, t, k in zip(pred.ravel(), target.ravel(), mask.ravel()):
        if k > 0:
            total += math.fabs(p - t)
            count += 1
    return total / count


def _loop_nll(mu, logvar, target, mask):
    total, count = 0.0, 0
    for m, lv, t, k in zip(mu.ravel(), logvar.ravel(), target.ravel(), mask.ravel()):
        if k > 0:
            total += 0.5 * lv + (t - m) ** 2 / (2.0 * math.exp(lv))
            count += 1
    return total / count


def _instance(seed):
    gen = np.random.default_rng(seed)
    shape = tuple(gen.integers(1, 5, size=3))
    mask = (gen.random(shape) > 0.3).astype(np.float64)
    mask.flat[gen.integers(mask.size)] = 1.0
    return (gen.normal(size=shape), gen.uniform(-2.0, 2.0, size=shape),
            gen.normal(scale=3.0, size=shape), mask)


class TestScalarLoopAgreement:
    @pytest.mark.parametrize("seed", range(50))
    def test_mae(self, seed):
        pred, _, target, mask = _instance(seed)
        expected = _loop_mae(pred, target, mask)
        assert mae_loss(constant(pred), target, mask).item() == pytest.approx(expected, rel=1e-12, abs=1e-12)

    @pytest.mark.parametrize("seed", range(50))
    def test_gaussian_nll(self, seed):
        mu, logvar, target, mask = _instance(seed)
        expected = _loop_nll(mu, logvar, target, mask)
        got = gaussian_nll_loss(constant(mu), constant(logvar), target, mask).item()
        assert got == pytest.approx(expected, rel=1e-12, abs=1e-12)

    def test_anchor_cases_are_exact(self):
        assert mae_loss(constant([0.5, -1.0]), [0.5, -1.0]).item() == 0.0
        assert gaussian_nll_loss(constant([1.0, 1.0]), constant([2.0, 2.0]), [1.0, 1.0]).item() == 1.0
