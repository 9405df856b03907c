"""Central finite-difference gradients: the independent oracle for backward().

Kept deliberately free of the tape machinery: the function under test is
re-run from scratch for every probe, so a sign error in any backward rule
cannot leak into the reference values.
"""

from __future__ import annotations

import numpy as np

from .tensor import GradTape, Tensor


def finite_difference_grad(f, x: Tensor, h=1e-5) -> np.ndarray:
    """Central-difference estimate of d f / d x, error O(h^2).

    f maps a Tensor to a scalar (float or 0-d tensor); x is not mutated.
    """
    base = x.data.astype(np.float64)
    grad = np.zeros_like(base)
    flat = grad.reshape(-1)
    xb = base.reshape(-1)
    for i in range(xb.size):
        orig = xb[i]
        xb[i] = orig + h
        fp = _scalar(f(Tensor(base.reshape(x.shape))))
        xb[i] = orig - h
        fm = _scalar(f(Tensor(base.reshape(x.shape))))
        xb[i] = orig
        flat[i] = (fp - fm) / (2.0 * h)
    return grad


def _scalar(v):
    if isinstance(v, Tensor):
        return v.item()
    return float(v)


def check_gradients(f, inputs, h=1e-5, rtol=1e-4, atol=1e-7):
    """Compare backward() grads of f(*inputs) against finite differences.

    Returns the worst relative error observed. inputs must be f64 leaf
    tensors with requires_grad set.
    """
    for t in inputs:
        t.grad = None
    with GradTape() as tape:
        loss = f(*inputs)
    tape.backward(loss)
    worst = 0.0
    for j, t in enumerate(inputs):
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)

        def f_of(x, j=j):
            args = list(inputs)
            args[j] = x
            return f(*args)

        numeric = finite_difference_grad(f_of, t, h=h)
        denom = np.maximum(np.abs(numeric), np.maximum(np.abs(analytic), atol / rtol))
        rel = np.abs(analytic - numeric) / denom
        err = float(rel.max()) if rel.size else 0.0
        worst = max(worst, err)
        if err > rtol:
            raise AssertionError(
                f"gradient mismatch on input {j}: rel err {err:.3e} > {rtol:.1e}\n"
                f"analytic={analytic.reshape(-1)[:6]}\nnumeric={numeric.reshape(-1)[:6]}"
            )
    return worst
