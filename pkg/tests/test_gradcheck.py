"""Backward rules vs the central-difference oracle, primitive by primitive,
then on random compositions of the full primitive set."""

import numpy as np
import pytest

import tsnas.tensor as T
from tsnas.gradcheck import check_gradients, finite_difference_grad
from tsnas.tensor import Tensor


def leaf(rng, *shape):
    return Tensor(rng.normal(size=shape), requires_grad=True)


def test_fd_on_sum():
    g = finite_difference_grad(lambda t: T.tsum(t), Tensor(np.array([1.0, -2.0, 0.5])))
    np.testing.assert_allclose(g, 1.0, atol=1e-8)


def test_fd_on_square():
    g = finite_difference_grad(lambda t: T.tsum(T.mul(t, t)), Tensor([3.0]), h=1e-4)
    np.testing.assert_allclose(g, [6.0], atol=1e-6)


UNARY_CASES = [
    ("neg", T.neg), ("exp", T.texp), ("sqrt_abs", lambda x: T.tsqrt(T.add(T.tabs(x), 1.0))),
    ("sigmoid", T.sigmoid), ("tanh", T.tanh), ("gelu", T.gelu),
    ("softmax", lambda x: T.softmax(x, axis=-1)), ("power", lambda x: T.power(x, 3.0)),
    ("mean", lambda x: T.tmean(x, axis=0, keepdims=True)),
    ("reshape", lambda x: T.reshape(x, (x.size,))),
]


@pytest.mark.parametrize("name,fn", UNARY_CASES, ids=[c[0] for c in UNARY_CASES])
def test_unary_gradients(name, fn, rng):
    x = leaf(rng, 3, 4)
    check_gradients(lambda t: T.tsum(T.mul(fn(t), fn(t))), [x])


def test_relu_gradient(rng):
    # keep probes away from the kink
    x = Tensor(rng.normal(size=(3, 4)) + np.sign(rng.normal(size=(3, 4))) * 0.5, requires_grad=True)
    check_gradients(lambda t: T.tsum(T.relu(t)), [x], h=1e-6)


def test_maximum_abs_log_gradients(rng):
    a, b = leaf(rng, 5), leaf(rng, 5)
    check_gradients(lambda x, y: T.tsum(T.maximum(T.mul(x, 2.0), y)), [a, b], h=1e-6)
    c = Tensor(np.abs(rng.normal(size=4)) + 0.5, requires_grad=True)
    check_gradients(lambda t: T.tsum(T.tlog(t)), [c])


def test_binary_broadcast_gradients(rng):
    a = leaf(rng, 2, 3, 4)
    b = leaf(rng, 4)
    check_gradients(lambda x, y: T.tsum(T.mul(T.add(x, y), T.sub(x, y))), [a, b])
    d = Tensor(np.abs(rng.normal(size=(3, 4))) + 1.0, requires_grad=True)
    check_gradients(lambda x, y: T.tsum(T.div(x, y)), [leaf(rng, 3, 4), d])


def test_matmul_gradients(rng):
    a, b = leaf(rng, 2, 3, 4), leaf(rng, 4, 5)
    check_gradients(lambda x, y: T.tsum(T.tanh(T.matmul(x, y))), [a, b])


def test_shape_op_gradients(rng):
    a, b = leaf(rng, 2, 3), leaf(rng, 2, 3)
    check_gradients(lambda x, y: T.tsum(T.mul(T.concat([x, y], axis=1), 2.0)), [a, b])
    check_gradients(lambda x, y: T.tsum(T.power(T.stack([x, y], axis=0), 2.0)), [a, b])
    c = leaf(rng, 4, 5)
    check_gradients(lambda t: T.tsum(T.mul(t[1:3, :3], t[0:2, 2:])), [c])
    check_gradients(lambda t: T.tsum(T.texp(T.permute(t, (1, 0)))), [c])
    check_gradients(lambda t: T.tsum(T.tanh(T.pad(t, ((1, 0), (2, 1))))), [c])


def test_gather_gradients(rng):
    x = leaf(rng, 3, 5)
    idx = np.array([[0, 0, 4], [2, 2, 2], [1, 3, 1]])
    check_gradients(lambda t: T.tsum(T.mul(T.gather(t, idx, axis=1), 3.0)), [x])


def test_layer_norm_gradients(rng):
    x = leaf(rng, 2, 3, 6)
    g = Tensor(rng.normal(size=6), requires_grad=True)
    b = Tensor(rng.normal(size=6), requires_grad=True)
    check_gradients(lambda t, gg, bb: T.tsum(T.power(T.layer_norm(t, gg, bb), 2.0)), [x, g, b], rtol=5e-4)


def test_conv_gradients(rng):
    x, w, b = leaf(rng, 2, 6, 3), leaf(rng, 4, 3, 3), leaf(rng, 4)
    check_gradients(lambda xx, ww, bb: T.tsum(T.tanh(T.conv1d_causal(xx, ww, bb, dilation=2))), [x, w, b])
    xd, wd, bd = leaf(rng, 2, 6, 3), leaf(rng, 3, 2), leaf(rng, 3)
    check_gradients(
        lambda xx, ww, bb: T.tsum(T.tanh(T.depthwise_conv1d_causal(xx, ww, bb, dilation=1))),
        [xd, wd, bd],
    )


def test_attention_gradients(rng):
    q, k, v = leaf(rng, 2, 4, 4), leaf(rng, 2, 4, 4), leaf(rng, 2, 4, 4)
    check_gradients(
        lambda a, b, c: T.tsum(T.power(T.scaled_dot_attention(a, b, c, causal=True), 2.0)),
        [q, k, v],
    )


# ---------------------------------------------------------------------------
# random compositions over the full primitive set


N_POOL = 15


def make_random_program(seed):
    """Freeze a random chain of 3-5 primitives; replayable for FD probes."""
    rng = np.random.default_rng(seed)
    steps = []
    for _ in range(int(rng.integers(3, 6))):
        steps.append(
            {
                "op": int(rng.integers(0, N_POOL)),
                "scale": float(rng.normal()),
                "shift": float(rng.normal()),
                "conv_w": rng.normal(size=(3, 3, 2)) * 0.5,
                "dw_w": rng.normal(size=(3, 3)) * 0.5,
                "dil": int(rng.integers(1, 3)),
                "causal": bool(rng.integers(0, 2)),
            }
        )

    def apply_step(t, s):
        i = s["op"]
        if i == 0:
            return T.sigmoid(t)
        if i == 1:
            return T.tanh(t)
        if i == 2:
            return T.gelu(t)
        if i == 3:
            return T.softmax(t, axis=-1)
        if i == 4:
            return T.texp(T.mul(t, 0.3))
        if i == 5:
            return T.mul(t, s["scale"])
        if i == 6:
            return T.add(t, s["shift"])
        if i == 7:
            return T.layer_norm(t, Tensor(np.ones(t.shape[-1])), Tensor(np.zeros(t.shape[-1])))
        if i == 8:
            return T.transpose(T.tanh(T.transpose(t, 1, 2)), 1, 2)
        if i == 9:
            return T.conv1d_causal(t, Tensor(s["conv_w"]), Tensor(np.zeros(3)), dilation=s["dil"])
        if i == 10:
            return T.depthwise_conv1d_causal(t, Tensor(s["dw_w"]), Tensor(np.zeros(3)), dilation=s["dil"])
        if i == 11:
            return T.scaled_dot_attention(t, t, t, causal=s["causal"])
        if i == 12:
            return T.pad(t, ((0, 0), (1, 0), (0, 0)))[:, : t.shape[1], :]
        if i == 13:
            return T.concat([t, T.mul(t, 0.5)], axis=1)[:, : t.shape[1], :]
        return T.maximum(t, T.mul(t, -0.5))

    def program(t):
        for s in steps:
            t = apply_step(t, s)
        return T.tmean(T.mul(t, t))

    return program


def run_composition_suite(n_cases, rtol=1e-4):
    worst = 0.0
    for i in range(n_cases):
        rng = np.random.default_rng(1000 + i)
        x = Tensor(rng.normal(size=(2, 4, 3)), requires_grad=True)
        f = make_random_program(2000 + i)
        err = check_gradients(f, [x], rtol=rtol)
        worst = max(worst, err)
    return worst


def test_random_composition_suite():
    """Backward vs finite differences on 200 random primitive compositions."""
    assert run_composition_suite(200) <= 1e-4
