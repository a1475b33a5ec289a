import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from affectlab import autograd as ag
from affectlab.errors import IndexOutOfRange, NonScalarLoss, ShapeMismatch


def grad_check(build, arrays, tol=1e-4):
    """Compare tape gradients of scalar ``build(*tensors)`` with central differences."""
    arrays = [np.array(a, dtype=np.float64) for a in arrays]

    def f(*xs):
        return float(build(*[ag.Tensor(x) for x in xs]).data)

    tensors = [ag.Tensor(a.copy(), requires_grad=True) for a in arrays]
    with ag.Tape() as tape:
        loss = build(*tensors)
    g = tape.backward(loss)
    numeric = oracles.finite_difference(f, arrays)
    for t, n in zip(tensors, numeric):
        assert oracles.rel_error(g[t], n, floor=1e-6) <= tol


def weighted(t, w):
    return ag.sum(t * w)


class TestForward:
    def test_softmax_uniform(self):
        np.testing.assert_allclose(ag.softmax(ag.Tensor(np.zeros(4))).data, 0.25)

    def test_softmax_stable(self):
        y = ag.softmax(ag.Tensor([1000.0, 1000.0, -1000.0])).data
        np.testing.assert_allclose(y, [0.5, 0.5, 0.0])

    @pytest.mark.parametrize("label", range(4))
    def test_cross_entropy_uniform(self, label):
        assert float(ag.cross_entropy(ag.Tensor(np.zeros(4)), label).data) == pytest.approx(math.log(4))

    def test_matmul_oracle(self, rng):
        a, b = rng.standard_normal((5, 3)), rng.standard_normal((3, 4))
        np.testing.assert_allclose(ag.matmul(ag.Tensor(a), ag.Tensor(b)).data,
                                   oracles.matmul(a, b), atol=1e-6)

    def test_shape_errors(self):
        with pytest.raises(ShapeMismatch):
            ag.matmul(ag.Tensor(np.ones((2, 3))), ag.Tensor(np.ones((2, 3))))
        with pytest.raises(ShapeMismatch):
            ag.add(ag.Tensor(np.ones(3)), ag.Tensor(np.ones(4)))
        with pytest.raises(ShapeMismatch):
            ag.concat([ag.Tensor(np.ones((2, 3))), ag.Tensor(np.ones((3, 3)))])

    def test_index_errors(self):
        with pytest.raises(IndexOutOfRange):
            ag.slice(ag.Tensor(np.ones(4)), 2, 6)
        with pytest.raises(IndexOutOfRange):
            ag.cross_entropy(ag.Tensor(np.zeros(3)), 3)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(-50, 50, allow_nan=False), min_size=1, max_size=10),
           st.integers(0, 9))
    def test_softmax_and_ce_properties(self, xs, label):
        x = ag.Tensor(np.array(xs))
        assert abs(float(ag.softmax(x).data.sum()) - 1.0) <= 1e-6
        assert float(ag.cross_entropy(x, label % len(xs)).data) >= 0.0

    def test_no_recording_outside_tape(self):
        a = ag.Tensor(np.ones(3), requires_grad=True)
        out = ag.tanh(a)
        assert not out.requires_grad


class TestBackward:
    def test_product_rule(self):
        x = ag.Tensor(2.0, requires_grad=True)
        y = ag.Tensor(3.0, requires_grad=True)
        with ag.Tape() as tape:
            loss = x * y
        g = tape.backward(loss)
        assert float(g[x]) == 3.0 and float(g[y]) == 2.0

    def test_tanh_at_zero(self):
        x = ag.Tensor(np.zeros(5), requires_grad=True)
        with ag.Tape() as tape:
            loss = ag.sum(ag.tanh(x))
        np.testing.assert_array_equal(tape.backward(loss)[x], np.ones(5))

    def test_fan_out_accumulates(self):
        x = ag.Tensor(1.5, requires_grad=True)
        with ag.Tape() as tape:
            loss = x * x + x
        assert float(tape.backward(loss)[x]) == pytest.approx(4.0)

    def test_untouched_is_zero(self):
        x = ag.Tensor(np.ones(3), requires_grad=True)
        unused = ag.Tensor(np.ones((2, 2)), requires_grad=True)
        with ag.Tape() as tape:
            loss = ag.sum(x)
        g = tape.backward(loss)
        assert unused not in g
        np.testing.assert_array_equal(g[unused], np.zeros((2, 2)))

    def test_non_scalar(self):
        x = ag.Tensor(np.ones(3), requires_grad=True)
        with ag.Tape() as tape:
            y = ag.tanh(x)
        with pytest.raises(NonScalarLoss):
            tape.backward(y)

    def test_tape_order(self):
        x = ag.Tensor(np.ones(2), requires_grad=True)
        with ag.Tape() as tape:
            a = ag.tanh(x)
            b = ag.sigmoid(a)
        ids = [(n.inputs[0].id, n.output.id) for n in tape.nodes]
        assert ids == [(x.id, a.id), (a.id, b.id)]


class TestGradients:
    """Every differentiable op against central differences at f64."""

    def test_matmul(self, rng):
        w = rng.uniform(-1, 1, (4, 2))
        grad_check(lambda a, b: weighted(a @ b, w),
                   [rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, (3, 2))])

    def test_batched_matmul(self, rng):
        w = rng.uniform(-1, 1, (2, 4, 2))
        grad_check(lambda a, b: weighted(a @ b, w),
                   [rng.uniform(-1, 1, (2, 4, 3)), rng.uniform(-1, 1, (3, 2))])

    def test_add_broadcast(self, rng):
        w = rng.uniform(-1, 1, (3, 4))
        grad_check(lambda a, b: weighted(a + b, w),
                   [rng.uniform(-1, 1, (3, 4)), rng.uniform(-1, 1, (4,))])

    def test_sub_mul(self, rng):
        w = rng.uniform(-1, 1, (3, 4))
        grad_check(lambda a, b: weighted((a - b) * b, w),
                   [rng.uniform(-1, 1, (3, 4)), rng.uniform(-1, 1, (1, 4))])

    def test_tanh_sigmoid(self, rng):
        w = rng.uniform(-1, 1, (3, 4))
        grad_check(lambda a: weighted(ag.tanh(a) * ag.sigmoid(a), w), [rng.uniform(-1, 1, (3, 4))])

    def test_softmax(self, rng):
        w = rng.uniform(-1, 1, (2, 5))
        grad_check(lambda a: weighted(ag.softmax(a), w), [rng.uniform(-1, 1, (2, 5))])

    def test_concat_slice(self, rng):
        w = rng.uniform(-1, 1, (2, 3))
        grad_check(lambda a, b: weighted(ag.slice(ag.concat([a, b]), 1, 4), w),
                   [rng.uniform(-1, 1, (2, 2)), rng.uniform(-1, 1, (2, 3))])

    def test_stack_reshape(self, rng):
        w = rng.uniform(-1, 1, (6, 2))
        grad_check(lambda a, b: weighted(ag.reshape(ag.stack([a, b], axis=1), (6, 2)), w),
                   [rng.uniform(-1, 1, (3, 2)), rng.uniform(-1, 1, (3, 2))])

    def test_sum_axis(self, rng):
        w = rng.uniform(-1, 1, (4,))
        grad_check(lambda a: weighted(ag.sum(a, axis=0), w), [rng.uniform(-1, 1, (3, 4))])

    def test_cross_entropy(self, rng):
        grad_check(lambda a: ag.sum(ag.cross_entropy(a, np.array([0, 2, 1]))),
                   [rng.uniform(-1, 1, (3, 4))])

    def test_three_layer_composition(self, rng):
        x = rng.uniform(-1, 1, (4, 3))

        def net(w1, w2, w3, b):
            h = ag.tanh(ag.Tensor(x) @ w1 + b)
            h = ag.sigmoid(h @ w2)
            return ag.sum(ag.cross_entropy(h @ w3, np.array([0, 1, 2, 1])))

        grad_check(net, [rng.uniform(-1, 1, (3, 5)), rng.uniform(-1, 1, (5, 4)),
                         rng.uniform(-1, 1, (4, 3)), rng.uniform(-1, 1, (5,))])
