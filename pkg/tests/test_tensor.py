"""Tests for the tensor engine: construction, ops, softmax and the reverse pass."""

import numpy as np
import pytest

from hyperforecast.core import ops
from hyperforecast.core.tape import Tape, backward
from hyperforecast.core.tensor import build_tensor, constant, parameter
from hyperforecast.errors import (
    DetachedTensor, DomainError, NonFiniteValue, NotScalar, ShapeMismatch,
)


class TestBuildTensor:
    def test_identity(self):
        t = build_tensor([2, 2], [1, 0, 0, 1])
        np.testing.assert_array_equal(t.values, np.eye(2))

    def test_vector(self):
        t = build_tensor([3], [1, 2, 3])
        assert t.shape == (3,)
        np.testing.assert_array_equal(t.values, [1.0, 2.0, 3.0])

    def test_rejects_nan(self):
        with pytest.raises(NonFiniteValue):
            build_tensor([2], [1, float("nan")])

    def test_rejects_wrong_count(self):
        with pytest.raises(ShapeMismatch):
            build_tensor([2, 2], [1, 2, 3])

    def test_item_needs_single_element(self):
        with pytest.raises(ShapeMismatch):
            build_tensor([2], [1, 2]).item()


class TestMatmul:
    def test_identity(self):
        b = constant([[3.0, 4.0], [5.0, 6.0]])
        np.testing.assert_array_equal(ops.matmul(constant(np.eye(2)), b).values, b.values)

    def test_two_by_two(self):
        out = ops.matmul(constant([[1.0, 2.0], [3.0, 4.0]]), constant([[5.0, 6.0], [7.0, 8.0]]))
        np.testing.assert_array_equal(out.values, [[19.0, 22.0], [43.0, 50.0]])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatch):
            ops.matmul(constant(np.ones((2, 3))), constant(np.ones((4, 2))))

    def test_leading_axes_broadcast(self):
        a = constant(np.ones((5, 3, 2, 4)))
        w = constant(np.ones((4, 6)))
        assert ops.matmul(a, w).shape == (5, 3, 2, 6)

    def test_associative(self, rng):
        a, b, c = (constant(rng.uniform(-1, 1, size=s)) for s in [(3, 4), (4, 5), (5, 2)])
        left = ops.matmul(ops.matmul(a, b), c).values
        right = ops.matmul(a, ops.matmul(b, c)).values
        np.testing.assert_allclose(left, right, atol=1e-12)


class TestPointwise:
    def test_sigmoid_zero(self):
        assert ops.sigmoid(constant([0.0])).values[0] == 0.5

    def test_sigmoid_half(self):
        assert ops.sigmoid(constant([0.5])).values[0] == pytest.approx(0.6224593312018546, abs=1e-12)

    def test_relu(self):
        np.testing.assert_array_equal(ops.relu(constant([-3.0, 3.0])).values, [0.0, 3.0])

    def test_dispatcher(self):
        a = constant([1.0, 2.0])
        np.testing.assert_array_equal(ops.apply_pointwise(a, "add", constant([1.0, 1.0])).values, [2.0, 3.0])
        assert ops.apply_pointwise(a, "sum").item() == 3.0
        assert ops.apply_pointwise(a, "concat_lastdim", a).shape == (4,)

    def test_dispatcher_unknown(self):
        with pytest.raises(ValueError):
            ops.apply_pointwise(constant([1.0]), "softplus")

    def test_binary_needs_operand(self):
        with pytest.raises(ShapeMismatch):
            ops.apply_pointwise(constant([1.0]), "mul")

    def test_log_domain(self):
        with pytest.raises(DomainError):
            ops.log(constant([0.0]))

    def test_div_by_zero(self):
        with pytest.raises(DomainError):
            ops.div(constant([1.0]), constant([0.0]))

    def test_broadcast_mismatch(self):
        with pytest.raises(ShapeMismatch):
            ops.add(constant(np.ones(3)), constant(np.ones(4)))

    def test_debug_checks_catch_overflow(self):
        with pytest.raises(NonFiniteValue):
            ops.exp(constant([1000.0]))


class TestSoftmax:
    def test_equal_logits(self):
        np.testing.assert_allclose(ops.softmax_lastdim(constant([0.0, 0.0])).values, [0.5, 0.5])

    def test_log_two(self):
        out = ops.softmax_lastdim(constant([np.log(2.0), 0.0])).values
        np.testing.assert_allclose(out, [2 / 3, 1 / 3], atol=1e-12)

    def test_large_logit(self):
        out = ops.softmax_lastdim(constant([1000.0, 0.0])).values
        assert out[0] == pytest.approx(1.0)
        assert out[1] < 1e-300

    def test_rows_sum_to_one(self, rng):
        out = ops.softmax_lastdim(constant(rng.normal(size=(4, 7)) * 10)).values
        np.testing.assert_allclose(out.sum(axis=-1), 1.0, atol=1e-12)

    def test_weighted_skips_zero_weights(self):
        out = ops.softmax_lastdim(constant([0.3, 5.0, 0.3]), constant([1.0, 0.0, 1.0])).values
        np.testing.assert_allclose(out, [0.5, 0.0, 0.5], atol=1e-12)

    def test_weighted_scales_by_weight(self):
        out = ops.softmax_lastdim(constant([0.0, 0.0]), constant([1.0, 3.0])).values
        np.testing.assert_allclose(out, [0.25, 0.75], atol=1e-12)

    def test_all_zero_weights(self):
        out = ops.softmax_lastdim(constant([[1.0, 2.0]]), constant([[0.0, 0.0]])).values
        np.testing.assert_array_equal(out, [[0.0, 0.0]])

    def test_negative_weights_rejected(self):
        with pytest.raises(DomainError):
            ops.softmax_lastdim(constant([1.0, 2.0]), constant([1.0, -1.0]))


class TestBackward:
    def _grad(self, f, values):
        x = parameter(values)
        with Tape() as tape:
            loss = f(x)
        backward(loss, tape)
        return x.grad

    def test_sum(self):
        np.testing.assert_array_equal(self._grad(ops.sum, [1.0, 2.0, 3.0]), [1.0, 1.0, 1.0])

    def test_square(self):
        g = self._grad(lambda x: ops.sum(ops.mul(x, x)), [2.0, -1.0])
        np.testing.assert_array_equal(g, [4.0, -2.0])

    def test_sigmoid(self):
        assert self._grad(lambda x: ops.sum(ops.sigmoid(x)), [0.0])[0] == pytest.approx(0.25)

    def test_broadcast_gradient_is_summed(self):
        a = parameter(np.ones((2, 3)))
        b = parameter(np.zeros(3))
        with Tape() as tape:
            loss = ops.sum(ops.add(a, b))
        backward(loss, tape)
        np.testing.assert_array_equal(b.grad, [2.0, 2.0, 2.0])
        np.testing.assert_array_equal(a.grad, np.ones((2, 3)))

    def test_reused_input_accumulates(self):
        g = self._grad(lambda x: ops.sum(ops.add(x, ops.mul(x, 3.0))), [1.0])
        assert g[0] == pytest.approx(4.0)

    def test_take_and_stack(self):
        g = self._grad(lambda x: ops.sum(ops.stack([ops.take(x, 1, axis=0), ops.take(x, 1, axis=0)])),
                       [[1.0, 2.0], [3.0, 4.0]])
        np.testing.assert_array_equal(g, [[0.0, 0.0], [2.0, 2.0]])

    def test_non_scalar_loss(self):
        x = parameter([1.0, 2.0])
        with Tape() as tape:
            y = ops.mul(x, 2.0)
        with pytest.raises(NotScalar):
            backward(y, tape)

    def test_tape_consumed(self):
        x = parameter([1.0])
        with Tape() as tape:
            loss = ops.sum(ops.mul(x, x))
        backward(loss, tape)
        with pytest.raises(DetachedTensor):
            backward(loss, tape)

    def test_loss_from_other_tape(self):
        x = parameter([1.0])
        with Tape():
            loss = ops.sum(x)
        with Tape() as other:
            pass
        with pytest.raises(DetachedTensor):
            backward(loss, other)

    def test_constants_are_not_recorded(self):
        with Tape() as tape:
            out = ops.add(constant([1.0]), constant([2.0]))
        assert len(tape) == 0
        assert out.tape_id is None

    def test_detach_blocks_gradient(self):
        x = parameter([3.0])
        with Tape() as tape:
            loss = ops.sum(ops.add(x, ops.mul(ops.detach(x), x)))
        backward(loss, tape)
        assert x.grad[0] == pytest.approx(4.0)

    def test_dropout_rate_zero_is_identity(self, rng):
        x = constant([1.0, 2.0])
        assert ops.dropout(x, 0.0, rng) is x

    def test_dropout_keeps_expectation(self, rng):
        out = ops.dropout(constant(np.ones(20000)), 0.5, rng).values
        assert set(np.unique(out)) <= {0.0, 2.0}
        assert out.mean() == pytest.approx(1.0, abs=0.05)
