"""Instance-reversible normalization and trend/seasonal decomposition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .nn import Module
from .tensor import ContractError, Tensor


@dataclass
class RevInState:
    """Per-instance, per-variable statistics over the look-back window."""

    mean: T.Tensor  # [B, 1, N]
    std: T.Tensor  # [B, 1, N]


class RevIN(Module):
    """Normalize each window per variable; invert the transform on forecasts.

    Statistics stay on the tape (no detach) so analytic gradients match
    finite differences exactly. Affine is off by default: the training loss
    lives in normalized space, and a learnable scale there could shrink the
    target instead of the error.
    """

    def __init__(self, n_vars, eps=1e-5, affine=False, dtype=np.float32):
        super().__init__()
        self.eps = eps
        self.affine = affine
        if affine:
            self.gamma = Tensor(np.ones(n_vars, dtype=dtype), requires_grad=True)
            self.beta = Tensor(np.zeros(n_vars, dtype=dtype), requires_grad=True)

    def normalize(self, x):
        """x: [B, L, N] -> (normalized x, state)."""
        mean = T.tmean(x, axis=1, keepdims=True)
        centered = T.sub(x, mean)
        var = T.tmean(T.mul(centered, centered), axis=1, keepdims=True)
        std = T.tsqrt(T.add(var, self.eps))
        out = T.div(centered, std)
        if self.affine:
            out = T.add(T.mul(out, self.gamma), self.beta)
        return out, RevInState(mean=mean, std=std)

    def transform(self, y, state):
        """Apply the stored normalization to another window (e.g. targets)."""
        out = T.div(T.sub(y, state.mean), state.std)
        if self.affine:
            out = T.add(T.mul(out, self.gamma), self.beta)
        return out

    def denormalize(self, yhat, state):
        """yhat: [B, H, N] in normalized space -> original scale."""
        if self.affine:
            yhat = T.div(T.sub(yhat, self.beta), T.add(self.gamma, self.eps * self.eps))
        return T.add(T.mul(yhat, state.std), state.mean)


def moving_average_decompose(x, kernel: int):
    """Centered moving average with replicate edge padding.

    x: [B, L, N] -> (trend, seasonal); seasonal = x - trend, so the two
    parts always sum back to x exactly.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ContractError(f"moving_average_decompose: kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return x, T.sub(x, x)
    half = kernel // 2
    front = x[:, :1, :]
    back = x[:, -1:, :]
    pieces = [front] * half + [x] + [back] * half
    xp = T.concat(pieces, axis=1)
    L = x.shape[1]
    acc = xp[:, 0:L, :]
    for i in range(1, kernel):
        acc = T.add(acc, xp[:, i : i + L, :])
    trend = T.mul(acc, 1.0 / kernel)
    return trend, T.sub(x, trend)
