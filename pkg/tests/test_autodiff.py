"""Autodiff core: primitives, LSTM cell, Adam, and gradient checking."""

import numpy as np
import pytest

import storykit.autodiff as ad
from storykit.autodiff import (AdamState, LstmWeights, Tensor, adam_step,
                               backward, clip_global_norm, grad_check,
                               init_lstm_weights, lstm_cell, zero_grads)


def _param(value):
    return Tensor(np.asarray(value, dtype=np.float64), requires_grad=True)


def _num_grad(f, params, eps=1e-6):
    """Central-difference gradients, independent of the tape machinery."""
    out = {}
    for name, p in params.items():
        g = np.zeros_like(p.value)
        flat = p.value.reshape(-1)
        gf = g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            hi = float(f().value)
            flat[i] = orig - eps
            lo = float(f().value)
            flat[i] = orig
            gf[i] = (hi - lo) / (2 * eps)
        out[name] = g
    return out


def _check(make_loss, params, tol=1e-7):
    num = _num_grad(make_loss, params)
    zero_grads(params)
    backward(make_loss())
    for name, p in params.items():
        np.testing.assert_allclose(p.grad, num[name], rtol=tol, atol=tol)


# --- elementary backward rules ----------------------------------------------

def test_backward_sum_is_ones():
    x = _param(np.random.default_rng(0).normal(size=(3, 4)))
    backward(ad.tsum(x))
    np.testing.assert_array_equal(x.grad, np.ones((3, 4)))


def test_backward_quadratic():
    x = _param([1.0, 2.0])
    backward(ad.tsum(ad.mul(x, x)))
    np.testing.assert_allclose(x.grad, [2.0, 4.0])


def test_backward_requires_scalar_loss():
    x = _param([1.0, 2.0])
    with pytest.raises(ValueError):
        backward(ad.mul(x, x))


def test_cross_entropy_gradient_is_softmax_minus_onehot():
    rng = np.random.default_rng(1)
    z = _param(rng.normal(size=(2, 5)))
    targets = np.array([3, 0])
    backward(ad.cross_entropy_logits(z, targets))
    expect = ad.softmax_np(z.value)
    expect[0, 3] -= 1.0
    expect[1, 0] -= 1.0
    np.testing.assert_allclose(z.grad, expect, atol=1e-12)
    # and against finite differences
    z2 = _param(z.value.copy())
    _check(lambda: ad.cross_entropy_logits(z2, targets), {"z": z2}, tol=1e-6)


@pytest.mark.parametrize("op", ["add", "sub", "mul", "matmul", "sigmoid",
                                "tanh", "concat", "slice", "stack", "transpose",
                                "bdot", "wsum", "lerp", "reshape", "rows"])
def test_primitive_gradients_match_central_differences(op):
    rng = np.random.default_rng(hash(op) % 2**31)
    a = _param(rng.normal(size=(3, 4)))
    b = _param(rng.normal(size=(3, 4)))

    if op == "add":
        loss = lambda: ad.tsum(ad.add(a, b))
    elif op == "sub":
        loss = lambda: ad.tsum(ad.mul(ad.sub(a, b), ad.sub(a, b)))
    elif op == "mul":
        loss = lambda: ad.tsum(ad.mul(a, b))
    elif op == "matmul":
        b = _param(rng.normal(size=(4, 2)))
        loss = lambda: ad.tsum(ad.matmul(a, b))
    elif op == "sigmoid":
        loss = lambda: ad.tsum(ad.mul(b, ad.sigmoid(a)))
    elif op == "tanh":
        loss = lambda: ad.tsum(ad.mul(b, ad.tanh(a)))
    elif op == "concat":
        loss = lambda: ad.tsum(ad.mul(ad.concat([a, b], axis=-1),
                                      ad.concat([b, a], axis=-1)))
    elif op == "slice":
        loss = lambda: ad.tsum(ad.mul(ad.slice_axis(a, 1, 3, axis=-1),
                                      ad.slice_axis(b, 0, 2, axis=-1)))
    elif op == "stack":
        loss = lambda: ad.tsum(ad.mul(ad.stack([a, b], axis=1),
                                      ad.stack([b, a], axis=1)))
    elif op == "transpose":
        loss = lambda: ad.tsum(ad.mul(ad.transpose(a), ad.transpose(b)))
    elif op == "bdot":
        s = _param(rng.normal(size=(3, 5, 4)))
        loss = lambda: ad.tsum(ad.bdot(a, s))
        b = s
    elif op == "wsum":
        w = _param(rng.normal(size=(3, 5)))
        s = _param(rng.normal(size=(3, 5, 4)))
        coef = Tensor(rng.normal(size=(3, 4)))
        loss = lambda: ad.tsum(ad.mul(coef, ad.wsum(w, s)))
        a, b = w, s
    elif op == "lerp":
        mask = rng.integers(0, 2, size=(3, 1)).astype(np.float64)
        loss = lambda: ad.tsum(ad.mul(ad.lerp_mask(a, b, mask), ad.lerp_mask(b, a, mask)))
    elif op == "reshape":
        loss = lambda: ad.tsum(ad.mul(ad.reshape(a, (4, 3)), ad.reshape(b, (4, 3))))
    elif op == "rows":
        table = _param(rng.normal(size=(6, 4)))
        ids = np.array([0, 2, 2, 5])
        w = rng.normal(size=(4, 4))
        loss = lambda: ad.tsum(ad.mul(ad.rows(table, ids), Tensor(w)))
        a, b = table, table
    _check(loss, {"a": a, "b": b})


def test_masked_softmax_rows_sum_to_one_and_respect_mask():
    rng = np.random.default_rng(3)
    scores = Tensor(rng.normal(size=(4, 6)) * 10)
    mask = np.ones((4, 6))
    mask[1, 3:] = 0.0
    p = ad.masked_softmax(scores, mask).value
    np.testing.assert_allclose(p.sum(axis=1), np.ones(4), atol=1e-9)
    assert (p[1, 3:] == 0).all()
    assert (p[0] > 0).all()


def test_softmax_stable_on_large_logits():
    p = ad.softmax_np(np.array([[1000.0, 999.0, 0.0]]))
    assert np.isfinite(p).all()
    np.testing.assert_allclose(p.sum(), 1.0, atol=1e-12)


# --- LSTM cell ---------------------------------------------------------------

def _zero_weights(a, d):
    z = lambda *s: Tensor(np.zeros(s), requires_grad=True)
    return LstmWeights(w_i=z(d, a + d), w_f=z(d, a + d), w_o=z(d, a + d),
                       w_g=z(d, a + d), b_i=z(d), b_f=z(d), b_o=z(d), b_g=z(d))


def test_lstm_cell_all_zero_weights():
    w = _zero_weights(3, 2)
    h, c = lstm_cell(Tensor(np.ones(3)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), w)
    np.testing.assert_array_equal(h.value, np.zeros(2))
    np.testing.assert_array_equal(c.value, np.zeros(2))


def test_lstm_cell_forget_bias_hand_value():
    # zero weights, forget bias +10, c_prev = 1, d = 1:
    # i = o = 0.5, f = sigmoid(10), g = 0 -> c = sigmoid(10) = 0.9999546,
    # h = 0.5 * tanh(c) = 0.380783
    w = _zero_weights(1, 1)
    w.b_f.value[:] = 10.0
    h, c = lstm_cell(Tensor(np.zeros(1)), Tensor(np.zeros(1)), Tensor(np.ones(1)), w)
    assert abs(c.value[0] - 0.99995) < 1e-4
    assert abs(h.value[0] - 0.380783) < 1e-4


def test_lstm_cell_shapes_and_bound():
    rng = np.random.default_rng(4)
    w = init_lstm_weights(3, 5, rng)
    h, c = lstm_cell(Tensor(rng.normal(size=3)), Tensor(rng.normal(size=5)),
                     Tensor(rng.normal(size=5)), w)
    assert h.value.shape == (5,) and c.value.shape == (5,)
    assert (np.abs(h.value) < 1).all()


def test_lstm_cell_dimension_mismatch():
    w = _zero_weights(3, 2)
    with pytest.raises(ValueError):
        lstm_cell(Tensor(np.zeros(4)), Tensor(np.zeros(2)), Tensor(np.zeros(2)), w)


def test_lstm_cell_gradients():
    rng = np.random.default_rng(5)
    w = init_lstm_weights(2, 3, rng)
    x = Tensor(rng.normal(size=2))
    hp = Tensor(rng.normal(size=3))
    cp = Tensor(rng.normal(size=3))

    def loss():
        h, c = lstm_cell(x, hp, cp, w)
        return ad.tsum(ad.add(ad.mul(h, h), c))

    _check(loss, w.tensors(), tol=1e-6)


# --- Adam --------------------------------------------------------------------

def test_adam_zero_gradient_is_identity():
    p = _param([1.0, -2.0])
    state = AdamState(lr=0.001)
    adam_step({"p": p}, {"p": np.zeros(2)}, state)
    np.testing.assert_array_equal(p.value, [1.0, -2.0])
    assert state.t == 1


def test_adam_first_step_hand_values():
    p = _param([1.0])
    state = AdamState(lr=0.001)
    adam_step({"p": p}, {"p": np.array([1.0])}, state)
    np.testing.assert_allclose(state.m["p"], [0.1], atol=1e-12)
    np.testing.assert_allclose(state.v["p"], [0.001], atol=1e-12)
    # bias-corrected m_hat = v_hat = 1 -> update = lr / (1 + eps)
    np.testing.assert_allclose(p.value, [1.0 - 0.001 / (1.0 + 1e-8)], atol=1e-12)


def test_adam_constant_gradient_monotone():
    p = _param([1.0])
    state = AdamState(lr=0.001)
    values = [p.value[0]]
    for _ in range(5):
        adam_step({"p": p}, {"p": np.array([1.0])}, state)
        values.append(p.value[0])
    assert all(b < a for a, b in zip(values, values[1:]))
    assert state.t == 5


def test_adam_shape_mismatch():
    p = _param([1.0, 2.0])
    with pytest.raises(ValueError):
        adam_step({"p": p}, {"p": np.zeros(3)}, AdamState())


def test_clip_global_norm():
    grads = {"a": np.array([3.0, 4.0])}  # norm 5
    clipped = clip_global_norm(dict(grads), 1.0)
    np.testing.assert_allclose(np.linalg.norm(clipped["a"]), 1.0, atol=1e-12)
    small = clip_global_norm({"a": np.array([0.3, 0.4])}, 1.0)
    np.testing.assert_allclose(small["a"], [0.3, 0.4])


# --- grad_check --------------------------------------------------------------

def test_grad_check_linear_function():
    rng = np.random.default_rng(6)
    w = Tensor(rng.normal(size=(4,)), requires_grad=True)
    c = rng.normal(size=4)
    assert grad_check(lambda p: ad.tsum(ad.mul(p["w"], Tensor(c))), {"w": w}) < 1e-8


def test_grad_check_detects_corrupted_gradient():
    rng = np.random.default_rng(7)
    w = Tensor(rng.normal(size=(4,)), requires_grad=True)
    c = rng.normal(size=4) + 3.0

    def f(p):
        # hand-rolled sum(c * tanh(w)) whose backward doubles coordinate 0
        t = np.tanh(p["w"].value)

        def bad_bwd(g):
            grad = g * c * (1 - t * t)
            grad[0] *= 2.0
            return (grad,)

        return Tensor(np.asarray((c * t).sum()), requires_grad=True,
                      _parents=(p["w"],), _backward=bad_bwd)

    assert grad_check(f, {"w": w}) > 1e-2


def test_grad_check_rejects_nonfinite_loss():
    w = Tensor(np.array([1.0]), requires_grad=True)

    def f(p):
        return Tensor(np.array(np.inf))

    with pytest.raises(ValueError):
        grad_check(f, {"w": w})


def test_no_grad_suppresses_tape():
    x = _param([1.0, 2.0])
    with ad.no_grad():
        y = ad.mul(x, x)
    assert not y.requires_grad and y._backward is None
