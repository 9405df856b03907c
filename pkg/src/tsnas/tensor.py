"""NumPy-backed tensors with a reverse-mode gradient tape.

All forward math in the package flows through the primitives here. A
``GradTape`` records every primitive whose output needs a gradient; walking
the tape backwards accumulates ``dLoss/dLeaf`` into each leaf's ``grad``.
Tapes are single-threaded and single-use.
"""

from __future__ import annotations

import threading

import numpy as np


class ShapeError(ValueError):
    """Operand shapes are illegal for the primitive that raised."""


class NumericFault(ArithmeticError):
    """A primitive produced NaN/Inf from finite inputs (or propagated one)."""


class ContractError(RuntimeError):
    """An API precondition was violated (wrong mode, consumed tape, ...)."""


_state = threading.local()

# Live-tensor byte accounting, the profiler's memory proxy. Plain module
# globals: updates ride the GIL; cross-thread counts are approximate.
_live_bytes = 0
_peak_bytes = 0


def _tape():
    return getattr(_state, "tape", None)


def _grad_enabled():
    return getattr(_state, "grad_enabled", True)


def reset_peak_bytes():
    global _peak_bytes
    _peak_bytes = _live_bytes


def peak_bytes():
    return _peak_bytes


def live_bytes():
    return _live_bytes


class Tensor:
    """Dense n-d float array, immutable after creation except grad accumulation."""

    __slots__ = ("data", "requires_grad", "grad", "__weakref__")

    def __init__(self, data, requires_grad=False, dtype=None):
        arr = np.asarray(data, dtype=dtype)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float64)
        self.data = arr
        self.requires_grad = bool(requires_grad)
        self.grad = None
        global _live_bytes, _peak_bytes
        _live_bytes += arr.nbytes
        if _live_bytes > _peak_bytes:
            _peak_bytes = _live_bytes

    def __del__(self):
        global _live_bytes
        try:
            _live_bytes -= self.data.nbytes
        except Exception:
            pass

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def size(self):
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self):
        return float(self.data.reshape(()))

    def numpy(self):
        return self.data

    def detach(self):
        return Tensor(self.data, requires_grad=False)

    def zero_grad(self):
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, p):
        return power(self, p)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, ax0, ax1):
        return transpose(self, ax0, ax1)

    def permute(self, axes):
        return permute(self, axes)


class GradTape:
    """Ordered record of primitives; ``backward`` walks it once, in reverse."""

    def __init__(self):
        self._entries = []  # (output Tensor, backward fn taking out.grad)
        self.consumed = False

    def __enter__(self):
        if _tape() is not None:
            raise ContractError("a GradTape is already active on this thread")
        _state.tape = self
        return self

    def __exit__(self, *exc):
        _state.tape = None
        return False

    def __len__(self):
        return len(self._entries)

    def backward(self, loss):
        if self.consumed:
            raise ContractError("GradTape already consumed; record a new tape")
        if not isinstance(loss, Tensor) or loss.size != 1:
            raise ContractError("backward requires a scalar loss tensor")
        if not loss.requires_grad:
            raise ContractError("loss does not require grad (no path to any leaf)")
        self.consumed = True
        loss.grad = np.ones_like(loss.data)
        for out, bw in reversed(self._entries):
            g = out.grad
            if g is None:
                continue
            bw(g)
        self._entries = []


class no_grad:
    """Disable tape recording inside the block (evaluation fast path)."""

    def __enter__(self):
        self._prev = _grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


def _as_tensor(x, dtype=None):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype if dtype is not None else np.float64))


def _check_finite(name, arr):
    # Single-pass reduction; NaN/Inf in any element poisons the sum.
    if not np.isfinite(arr.sum()):
        if np.isfinite(arr).all():
            return  # huge-but-finite values can overflow the sum check
        raise NumericFault(f"{name} produced non-finite values")


def _out(name, data, inputs, bw, check=True):
    """Wrap raw output data; record a tape entry when a grad path exists."""
    if check:
        _check_finite(name, data)
    req = False
    if _grad_enabled():
        for t in inputs:
            if t.requires_grad:
                req = True
                break
    out = Tensor(data, requires_grad=req)
    if req:
        tape = _tape()
        if tape is not None and not tape.consumed:
            tape._entries.append((out, bw(out)))
    return out


def _ensure_grad(t):
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    return t.grad


def _accum(t, g):
    if t.requires_grad:
        if t.grad is None:
            t.grad = np.array(g)  # own the buffer; g may alias or broadcast
        else:
            t.grad += g


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, d in enumerate(shape) if d == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# ---------------------------------------------------------------------------
# elementwise binary


def _binary(name, a, b, fwd, bwa, bwb, check=True):
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    try:
        data = fwd(a.data, b.data)
    except ValueError as e:
        raise ShapeError(f"{name}: incompatible shapes {a.shape} and {b.shape}") from e

    def bw(out):
        def run(g):
            _accum(a, _unbroadcast(bwa(g, a.data, b.data), a.shape))
            _accum(b, _unbroadcast(bwb(g, a.data, b.data), b.shape))

        return run

    return _out(name, data, (a, b), bw, check=check)


def add(a, b):
    return _binary("add", a, b, lambda x, y: x + y, lambda g, x, y: g, lambda g, x, y: g)


def sub(a, b):
    return _binary("sub", a, b, lambda x, y: x - y, lambda g, x, y: g, lambda g, x, y: -g)


def mul(a, b):
    return _binary("mul", a, b, lambda x, y: x * y, lambda g, x, y: g * y, lambda g, x, y: g * x)


def div(a, b):
    return _binary(
        "div", a, b, lambda x, y: x / y, lambda g, x, y: g / y, lambda g, x, y: -g * x / (y * y)
    )


def maximum(a, b):
    def bwa(g, x, y):
        return g * (x >= y)

    def bwb(g, x, y):
        return g * (x < y)

    return _binary("maximum", a, b, np.maximum, bwa, bwb, check=False)


# ---------------------------------------------------------------------------
# elementwise unary


def _unary(name, a, fwd, make_bw, check=True):
    a = _as_tensor(a)
    data = fwd(a.data)

    def bw(out):
        local = make_bw(a.data, data)

        def run(g):
            _accum(a, local(g))

        return run

    return _out(name, data, (a,), bw, check=check)


def neg(a):
    return _unary("neg", a, lambda x: -x, lambda x, y: lambda g: -g, check=False)


def texp(a):
    return _unary("exp", a, np.exp, lambda x, y: lambda g: g * y)


def tlog(a):
    return _unary("log", a, np.log, lambda x, y: lambda g: g / x)


def tsqrt(a):
    return _unary("sqrt", a, np.sqrt, lambda x, y: lambda g: g * 0.5 / y)


def tabs(a):
    return _unary("abs", a, np.abs, lambda x, y: lambda g: g * np.sign(x), check=False)


def power(a, p):
    p = float(p)
    return _unary("power", a, lambda x: x**p, lambda x, y: lambda g: g * p * x ** (p - 1.0))


def sigmoid(a):
    def fwd(x):
        return 1.0 / (1.0 + np.exp(-x))

    return _unary("sigmoid", a, fwd, lambda x, y: lambda g: g * y * (1.0 - y), check=False)


def tanh(a):
    return _unary("tanh", a, np.tanh, lambda x, y: lambda g: g * (1.0 - y * y), check=False)


def relu(a):
    return _unary("relu", a, lambda x: np.maximum(x, 0.0), lambda x, y: lambda g: g * (x > 0), check=False)


_GELU_C = 0.7978845608028654  # sqrt(2/pi)
_GELU_A = 0.044715


def gelu(a):
    """tanh-approximation GELU; smooth, so finite differences stay clean."""

    def fwd(x):
        return 0.5 * x * (1.0 + np.tanh(_GELU_C * (x + _GELU_A * (x * x * x))))

    def make_bw(x, y):
        t = np.tanh(_GELU_C * (x + _GELU_A * (x * x * x)))

        def run(g):
            du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
            return g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)

        return run

    return _unary("gelu", a, fwd, make_bw)


# ---------------------------------------------------------------------------
# reductions


def tsum(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bw(out):
        def run(g):
            if axis is None:
                _accum(a, np.broadcast_to(g, a.shape))
            else:
                ge = g if keepdims else np.expand_dims(g, axis)
                _accum(a, np.broadcast_to(ge, a.shape))

        return run

    return _out("sum", data, (a,), bw)


def tmean(a, axis=None, keepdims=False):
    a = _as_tensor(a)
    data = a.data.mean(axis=axis, keepdims=keepdims)
    if axis is None:
        n = a.size
    elif isinstance(axis, tuple):
        n = int(np.prod([a.shape[i] for i in axis]))
    else:
        n = a.shape[axis]

    def bw(out):
        def run(g):
            if axis is None:
                _accum(a, np.broadcast_to(g / n, a.shape))
            else:
                ge = g if keepdims else np.expand_dims(g, axis)
                _accum(a, np.broadcast_to(ge / n, a.shape))

        return run

    return _out("mean", data, (a,), bw)


# ---------------------------------------------------------------------------
# shape ops


def reshape(a, shape):
    a = _as_tensor(a)
    try:
        data = a.data.reshape(shape)
    except ValueError as e:
        raise ShapeError(f"reshape: cannot view {a.shape} as {shape}") from e

    def bw(out):
        def run(g):
            _accum(a, g.reshape(a.shape))

        return run

    return _out("reshape", data, (a,), bw, check=False)


def transpose(a, ax0, ax1):
    a = _as_tensor(a)
    data = np.swapaxes(a.data, ax0, ax1)

    def bw(out):
        def run(g):
            _accum(a, np.swapaxes(g, ax0, ax1))

        return run

    return _out("transpose", data, (a,), bw, check=False)


def permute(a, axes):
    a = _as_tensor(a)
    axes = tuple(axes)
    data = np.transpose(a.data, axes)
    inv = tuple(np.argsort(axes))

    def bw(out):
        def run(g):
            _accum(a, np.transpose(g, inv))

        return run

    return _out("permute", data, (a,), bw, check=False)


def concat(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(
            f"concat: shapes {[t.shape for t in tensors]} do not align off axis {axis}"
        ) from e
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def bw(out):
        def run(g):
            for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                _accum(t, g[tuple(idx)])

        return run

    return _out("concat", data, tuple(tensors), bw, check=False)


def stack(tensors, axis=0):
    tensors = [_as_tensor(t) for t in tensors]
    try:
        data = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as e:
        raise ShapeError(f"stack: mismatched shapes {[t.shape for t in tensors]}") from e

    def bw(out):
        def run(g):
            for i, t in enumerate(tensors):
                _accum(t, np.take(g, i, axis=axis))

        return run

    return _out("stack", data, tuple(tensors), bw, check=False)


def getitem(a, idx):
    """Basic indexing only (ints/slices/ellipsis); use gather for fancy index."""
    a = _as_tensor(a)
    data = a.data[idx]

    def bw(out):
        def run(g):
            if a.requires_grad:
                _ensure_grad(a)
                a.grad[idx] += g

        return run

    return _out("slice", data, (a,), bw, check=False)


def gather(a, index, axis):
    """take_along_axis with integer index array (repeats allowed)."""
    a = _as_tensor(a)
    index = np.asarray(index)
    try:
        data = np.take_along_axis(a.data, index, axis=axis)
    except (ValueError, IndexError) as e:
        raise ShapeError(f"gather: index shape {index.shape} invalid for {a.shape}") from e

    def bw(out):
        def run(g):
            if a.requires_grad:
                _ensure_grad(a)
                ogrid = list(np.indices(index.shape, sparse=True))
                ogrid[axis] = index
                np.add.at(a.grad, tuple(ogrid), g)

        return run

    return _out("gather", data, (a,), bw, check=False)


def pad(a, pad_width):
    """Constant (zero) padding; pad_width as in np.pad."""
    a = _as_tensor(a)
    data = np.pad(a.data, pad_width)

    def bw(out):
        def run(g):
            sl = tuple(slice(lo, g.shape[i] - hi) for i, (lo, hi) in enumerate(pad_width))
            _accum(a, g[sl])

        return run

    return _out("pad", data, (a,), bw, check=False)


# ---------------------------------------------------------------------------
# matmul


def matmul(a, b):
    a = _as_tensor(a)
    b = _as_tensor(b, a.dtype)
    try:
        data = a.data @ b.data
    except ValueError as e:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}") from e

    def bw(out):
        def run(g):
            if a.requires_grad:
                ga = g @ np.swapaxes(b.data, -1, -2)
                _accum(a, _unbroadcast(ga, a.shape) if ga.shape != a.shape else ga)
            if b.requires_grad:
                gb = np.swapaxes(a.data, -1, -2) @ g
                _accum(b, _unbroadcast(gb, b.shape) if gb.shape != b.shape else gb)

        return run

    return _out("matmul", data, (a, b), bw)


# ---------------------------------------------------------------------------
# fused neural primitives


def softmax(a, axis=-1):
    a = _as_tensor(a)
    x = a.data
    shifted = x - x.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def bw(out):
        def run(g):
            dot = (g * s).sum(axis=axis, keepdims=True)
            _accum(a, s * (g - dot))

        return run

    return _out("softmax", s, (a,), bw, check=False)


def layer_norm(a, gamma, beta, eps=1e-5):
    """Normalize over the last axis, then scale/shift."""
    a = _as_tensor(a)
    gamma = _as_tensor(gamma, a.dtype)
    beta = _as_tensor(beta, a.dtype)
    if gamma.shape != a.shape[-1:] or beta.shape != a.shape[-1:]:
        raise ShapeError(
            f"layer_norm: affine shapes {gamma.shape}/{beta.shape} must equal last axis ({a.shape[-1]},)"
        )
    x = a.data
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x - mu) * inv
    data = gamma.data * xhat + beta.data

    def bw(out):
        def run(g):
            n = x.shape[-1]
            if gamma.requires_grad:
                _accum(gamma, (g * xhat).reshape(-1, n).sum(axis=0))
            if beta.requires_grad:
                _accum(beta, g.reshape(-1, n).sum(axis=0))
            if a.requires_grad:
                gy = g * gamma.data
                m1 = gy.mean(axis=-1, keepdims=True)
                m2 = (gy * xhat).mean(axis=-1, keepdims=True)
                _accum(a, (gy - m1 - xhat * m2) * inv)

        return run

    return _out("layer_norm", data, (a, gamma, beta), bw)


def dropout(a, p, training, rng=None):
    """Inverted-scaling dropout; eval mode returns the input unchanged."""
    a = _as_tensor(a)
    if not training or p <= 0.0:
        return a
    if rng is None:
        raise ContractError("dropout in training mode requires an explicit rng")
    keep = 1.0 - p
    mask = (rng.uniform(a.shape) < keep).astype(a.dtype) / keep

    def bw(out):
        def run(g):
            _accum(a, g * mask)

        return run

    return _out("dropout", a.data * mask, (a,), bw, check=False)


def _conv_index(L, K, dilation):
    t = np.arange(L)[:, None]
    k = np.arange(K)[None, :]
    return t + k * dilation  # into input padded by (K-1)*dilation on the left


def conv1d_causal(x, w, b, dilation=1):
    """Dilated causal 1-d convolution.

    x: [B, L, Cin], w: [Cout, Cin, K], b: [Cout] -> [B, L, Cout]. Left
    zero-padding by (K-1)*dilation keeps step t blind to steps > t.
    """
    x = _as_tensor(x)
    w = _as_tensor(w, x.dtype)
    b = _as_tensor(b, x.dtype)
    if x.ndim != 3 or w.ndim != 3 or x.shape[2] != w.shape[1]:
        raise ShapeError(f"conv1d_causal: x {x.shape} vs w {w.shape} (Cin must match axis 2/1)")
    B, L, Cin = x.shape
    Cout, _, K = w.shape
    lpad = (K - 1) * dilation
    xp = np.pad(x.data, ((0, 0), (lpad, 0), (0, 0)))
    idx = _conv_index(L, K, dilation)
    cols = xp[:, idx, :]  # [B, L, K, Cin]
    data = np.einsum("blkc,ock->blo", cols, w.data, optimize=True) + b.data

    def bw(out):
        def run(g):
            if w.requires_grad:
                _accum(w, np.einsum("blkc,blo->ock", cols, g, optimize=True))
            if b.requires_grad:
                _accum(b, g.reshape(-1, Cout).sum(axis=0))
            if x.requires_grad:
                gcols = np.einsum("blo,ock->blkc", g, w.data, optimize=True)
                gxp = np.zeros_like(xp)
                np.add.at(gxp, (slice(None), idx, slice(None)), gcols)
                _accum(x, gxp[:, lpad:, :])

        return run

    return _out("conv1d_causal", data, (x, w, b), bw)


def depthwise_conv1d_causal(x, w, b, dilation=1):
    """Per-channel dilated causal convolution. w: [C, K], b: [C]."""
    x = _as_tensor(x)
    w = _as_tensor(w, x.dtype)
    b = _as_tensor(b, x.dtype)
    if x.ndim != 3 or w.ndim != 2 or x.shape[2] != w.shape[0]:
        raise ShapeError(f"depthwise_conv1d_causal: x {x.shape} vs w {w.shape}")
    B, L, C = x.shape
    K = w.shape[1]
    lpad = (K - 1) * dilation
    xp = np.pad(x.data, ((0, 0), (lpad, 0), (0, 0)))
    idx = _conv_index(L, K, dilation)
    cols = xp[:, idx, :]  # [B, L, K, C]
    data = np.einsum("blkc,ck->blc", cols, w.data, optimize=True) + b.data

    def bw(out):
        def run(g):
            if w.requires_grad:
                _accum(w, np.einsum("blkc,blc->ck", cols, g, optimize=True))
            if b.requires_grad:
                _accum(b, g.reshape(-1, C).sum(axis=0))
            if x.requires_grad:
                gcols = np.einsum("blc,ck->blkc", g, w.data, optimize=True)
                gxp = np.zeros_like(xp)
                np.add.at(gxp, (slice(None), idx, slice(None)), gcols)
                _accum(x, gxp[:, lpad:, :])

        return run

    return _out("depthwise_conv1d_causal", data, (x, w, b), bw)


def scaled_dot_attention(q, k, v, causal=False):
    """softmax(q k^T / sqrt(d)) v over the last two axes ([..., T, d])."""
    q = _as_tensor(q)
    k = _as_tensor(k)
    v = _as_tensor(v)
    d = q.shape[-1]
    scores = mul(matmul(q, transpose(k, -1, -2)), 1.0 / np.sqrt(d))
    if causal:
        Tq, Tk = q.shape[-2], k.shape[-2]
        m = np.triu(np.full((Tq, Tk), -1e9, dtype=q.dtype), k=1)
        scores = add(scores, Tensor(m))
    return matmul(softmax(scores, axis=-1), v)


def _sigmoid_np(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_loop(xw, wh, h0, c0):
    """Fused LSTM recurrence with hand-written truncated-free BPTT.

    xw: [B, L, 4d] precomputed input projections (bias folded in), gate
    layout [i|f|o|g]; wh: [d, 4d]; h0, c0: [B, d].
    Returns (hs [B, L, d], c_T [B, d]). One tape entry covers the whole
    loop, anchored on hs; the closure also drains c_T's gradient.
    """
    xw = _as_tensor(xw)
    wh = _as_tensor(wh, xw.dtype)
    h0 = _as_tensor(h0, xw.dtype)
    c0 = _as_tensor(c0, xw.dtype)
    B, L, four_d = xw.shape
    d = four_d // 4
    if wh.shape != (d, four_d) or h0.shape != (B, d) or c0.shape != (B, d):
        raise ShapeError(f"lstm_loop: xw {xw.shape}, wh {wh.shape}, h0 {h0.shape}, c0 {c0.shape}")
    W = wh.data
    h, c = h0.data, c0.data
    hs = np.empty((B, L, d), dtype=xw.dtype)
    gates = np.empty((B, L, four_d), dtype=xw.dtype)
    cs_prev = np.empty((B, L, d), dtype=xw.dtype)
    tanh_c = np.empty((B, L, d), dtype=xw.dtype)
    xd = xw.data
    for t in range(L):
        z = xd[:, t, :] + h @ W
        s = _sigmoid_np(z[:, : 3 * d])
        g = np.tanh(z[:, 3 * d :])
        i, f, o = s[:, :d], s[:, d : 2 * d], s[:, 2 * d :]
        cs_prev[:, t, :] = c
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        hs[:, t, :] = h
        gates[:, t, :d] = i
        gates[:, t, d : 2 * d] = f
        gates[:, t, 2 * d : 3 * d] = o
        gates[:, t, 3 * d :] = g
        tanh_c[:, t, :] = tc
    _check_finite("lstm_loop", hs)
    out_c = Tensor(c, requires_grad=False)
    req = _grad_enabled() and (
        xw.requires_grad or wh.requires_grad or h0.requires_grad or c0.requires_grad
    )
    out_h = Tensor(hs, requires_grad=req)
    out_c.requires_grad = req

    if req:

        def bw(g_hs):
            g_ct = out_c.grad
            dxw = np.zeros_like(xd)
            dW = np.zeros_like(W) if wh.requires_grad else None
            dh_carry = np.zeros((B, d), dtype=xd.dtype)
            dc_carry = g_ct.copy() if g_ct is not None else np.zeros((B, d), dtype=xd.dtype)
            WT = W.T
            for t in range(L - 1, -1, -1):
                i = gates[:, t, :d]
                f = gates[:, t, d : 2 * d]
                o = gates[:, t, 2 * d : 3 * d]
                g = gates[:, t, 3 * d :]
                tc = tanh_c[:, t, :]
                dh = g_hs[:, t, :] + dh_carry
                do = dh * tc
                dc = dh * o * (1.0 - tc * tc) + dc_carry
                di = dc * g
                df = dc * cs_prev[:, t, :]
                dg = dc * i
                dz = np.concatenate(
                    [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)],
                    axis=1,
                )
                dxw[:, t, :] = dz
                h_prev = hs[:, t - 1, :] if t > 0 else h0.data
                if dW is not None:
                    dW += h_prev.T @ dz
                dh_carry = dz @ WT
                dc_carry = dc * f
            _accum(xw, dxw)
            if dW is not None:
                _accum(wh, dW)
            _accum(h0, dh_carry)
            _accum(c0, dc_carry)

        tape = _tape()
        if tape is not None and not tape.consumed:
            tape._entries.append((out_h, bw))
    return out_h, out_c


def gru_loop(xw, wh, h0):
    """Fused GRU recurrence, gate layout [r|z|n]; n uses r * (Wh h)_n.

    xw: [B, L, 3d] (bias folded in); wh: [d, 3d]; h0: [B, d] -> hs [B, L, d].
    """
    xw = _as_tensor(xw)
    wh = _as_tensor(wh, xw.dtype)
    h0 = _as_tensor(h0, xw.dtype)
    B, L, three_d = xw.shape
    d = three_d // 3
    if wh.shape != (d, three_d) or h0.shape != (B, d):
        raise ShapeError(f"gru_loop: xw {xw.shape}, wh {wh.shape}, h0 {h0.shape}")
    W = wh.data
    h = h0.data
    hs = np.empty((B, L, d), dtype=xw.dtype)
    rzn = np.empty((B, L, three_d), dtype=xw.dtype)
    hwn_all = np.empty((B, L, d), dtype=xw.dtype)
    xd = xw.data
    for t in range(L):
        hw = h @ W
        rz = _sigmoid_np(xd[:, t, : 2 * d] + hw[:, : 2 * d])
        r, z = rz[:, :d], rz[:, d:]
        hwn = hw[:, 2 * d :]
        n = np.tanh(xd[:, t, 2 * d :] + r * hwn)
        h = (1.0 - z) * n + z * h
        hs[:, t, :] = h
        rzn[:, t, :d] = r
        rzn[:, t, d : 2 * d] = z
        rzn[:, t, 2 * d :] = n
        hwn_all[:, t, :] = hwn
    _check_finite("gru_loop", hs)
    req = _grad_enabled() and (xw.requires_grad or wh.requires_grad or h0.requires_grad)
    out = Tensor(hs, requires_grad=req)

    if req:

        def bw(g_hs):
            dxw = np.zeros_like(xd)
            dW = np.zeros_like(W) if wh.requires_grad else None
            dh_carry = np.zeros((B, d), dtype=xd.dtype)
            WT = W.T
            dhw = np.empty((B, three_d), dtype=xd.dtype)
            for t in range(L - 1, -1, -1):
                r = rzn[:, t, :d]
                z = rzn[:, t, d : 2 * d]
                n = rzn[:, t, 2 * d :]
                hwn = hwn_all[:, t, :]
                h_prev = hs[:, t - 1, :] if t > 0 else h0.data
                dh = g_hs[:, t, :] + dh_carry
                dn = dh * (1.0 - z)
                dz = dh * (h_prev - n)
                dh_prev = dh * z
                dn_pre = dn * (1.0 - n * n)
                dr = dn_pre * hwn
                dz_pre = dz * z * (1 - z)
                dr_pre = dr * r * (1 - r)
                dxw[:, t, :d] = dr_pre
                dxw[:, t, d : 2 * d] = dz_pre
                dxw[:, t, 2 * d :] = dn_pre
                dhw[:, :d] = dr_pre
                dhw[:, d : 2 * d] = dz_pre
                dhw[:, 2 * d :] = dn_pre * r
                if dW is not None:
                    dW += h_prev.T @ dhw
                dh_carry = dhw @ WT + dh_prev
            _accum(xw, dxw)
            if dW is not None:
                _accum(wh, dW)
            _accum(h0, dh_carry)

        tape = _tape()
        if tape is not None and not tape.consumed:
            tape._entries.append((out, bw))
    return out


def zeros(shape, dtype=np.float32, requires_grad=False):
    return Tensor(np.zeros(shape, dtype=dtype), requires_grad=requires_grad)


def zeros_like(t, requires_grad=False):
    return Tensor(np.zeros_like(t.data), requires_grad=requires_grad)
