"""Tests for the hypergraph GRU step and its unroll over a window."""

import numpy as np
import pytest

from hyperforecast.core import ops
from hyperforecast.core.gradcheck import grad_check
from hyperforecast.core.tensor import constant
from hyperforecast.errors import ShapeMismatch
from hyperforecast.models.config import ModelConfig
from hyperforecast.models.params import HgrlParams
from hyperforecast.services.hgat_service import hgat_forward
from hyperforecast.services.hgrl_service import gru_step, hgrl_unroll

from .conftest import incidence

INC = [[1, 0], [1, 1], [0, 1]]


@pytest.fixture
def params():
    cfg = ModelConfig(n=3, d=4, m=2, hgat_heads=1, heads=2, dropout=0.0)
    return HgrlParams.init(cfg, np.random.default_rng(21))


def _state(seed, shape=(3, 4)):
    return constant(np.random.default_rng(seed).uniform(-1, 1, size=shape))


def _hgat_features(x, params):
    out = hgat_forward(ops.reshape(x, (3, 1, 4)), incidence(INC), params.hgat)
    return ops.reshape(out, (3, 4))


class TestGruStep:
    def test_update_gate_open_keeps_state(self, params):
        params.b_u.values[...] = 50.0
        h_prev = _state(1)
        out = gru_step(_state(2), h_prev, incidence(INC), params)
        np.testing.assert_allclose(out.values, h_prev.values, atol=1e-12)

    def test_update_gate_closed_takes_candidate(self, params):
        params.b_u.values[...] = -50.0
        x, h_prev = _state(2), _state(1)
        out = gru_step(x, h_prev, incidence(INC), params)

        f = _hgat_features(x, params)
        joint = ops.concat([f, h_prev], axis=-1)
        reset = ops.sigmoid(ops.add(ops.matmul(joint, params.w_r), params.b_r))
        candidate = ops.tanh(ops.add(ops.matmul(ops.concat([f, ops.mul(reset, h_prev)], axis=-1), params.w_c), params.b_c))
        np.testing.assert_allclose(out.values, candidate.values, atol=1e-12)

    def test_zero_input_and_state(self, params):
        # with the feature half of W_u zeroed the update gate sits at σ(0)
        params.w_u.values[...] = 0.0
        zeros = constant(np.zeros((3, 4)))
        out = gru_step(zeros, zeros, incidence(INC), params)
        f = _hgat_features(zeros, params)
        candidate = ops.tanh(ops.matmul(ops.concat([f, zeros], axis=-1), params.w_c))
        np.testing.assert_allclose(out.values, 0.5 * candidate.values, atol=1e-12)

    def test_state_shape_checked(self, params):
        with pytest.raises(ShapeMismatch):
            gru_step(_state(1), _state(2, (3, 2)), incidence(INC), params)

    def test_batched(self, params):
        x = constant(np.random.default_rng(3).uniform(-1, 1, size=(2, 3, 4)))
        h = constant(np.zeros((2, 3, 4)))
        out = gru_step(x, h, incidence(INC), params)
        single = gru_step(constant(x.values[1]), constant(np.zeros((3, 4))), incidence(INC), params)
        np.testing.assert_allclose(out.values[1], single.values, atol=1e-12)


class TestUnroll:
    def test_single_step_matches_gru_step(self, params):
        window = constant(np.random.default_rng(4).uniform(-1, 1, size=(3, 1, 4)))
        out = hgrl_unroll(window, incidence(INC), params)
        step = gru_step(constant(window.values[:, 0]), constant(np.zeros((3, 4))), incidence(INC), params)
        assert out.shape == (3, 1, 4)
        np.testing.assert_allclose(out.values[:, 0], step.values, atol=1e-12)

    def test_open_update_gate_keeps_zero_state(self, params):
        for t in params.parameters():
            t.values[...] = 0.0
        params.b_u.values[...] = 50.0
        out = hgrl_unroll(constant(np.zeros((3, 5, 4))), incidence(INC), params)
        np.testing.assert_array_equal(out.values, np.zeros((3, 5, 4)))

    def test_hidden_state_bounded(self, params):
        window = constant(np.random.default_rng(5).normal(scale=3.0, size=(2, 3, 6, 4)))
        out = hgrl_unroll(window, incidence(INC), params).values
        assert out.shape == (2, 3, 6, 4)
        assert np.all(np.abs(out) <= 1.0)

    def test_rejects_bad_rank(self, params):
        with pytest.raises(ShapeMismatch):
            hgrl_unroll(constant(np.zeros((3, 4))), incidence(INC), params)

    def test_grad_check_three_steps(self, params):
        window = constant(np.random.default_rng(6).uniform(-1, 1, size=(3, 3, 4)))
        weights = constant(np.random.default_rng(7).uniform(-1, 1, size=(3, 3, 4)))
        checked = [window, params.w_u, params.w_r, params.w_c, params.b_c, params.hgat.layers[0].heads[0].w1]

        def f(_):
            return ops.sum(ops.mul(hgrl_unroll(window, incidence(INC), params), weights))
        assert grad_check(f, checked) < 1e-4
