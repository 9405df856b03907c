"""Candidate operations for Flat cells.

Flat cells carry a (backcast, forecast) stream pair shaped [B, N, L] /
[B, N, H]. Linear replaces the forecast stream with a map of the
concatenated streams; the three residual-block variants share one FC
backbone per edge and differ only in their basis expansions.
"""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import tensor as T
from .nn import LayerNorm, Linear, Module
from .rng import Rng
from .tensor import ShapeError, Tensor


class FlatOpKind(str, Enum):
    Linear = "Linear"
    NBeatsGeneric = "NBeatsGeneric"
    NBeatsTrend = "NBeatsTrend"
    NBeatsSeasonal = "NBeatsSeasonal"
    Skip = "Skip"


FLAT_OPS = tuple(FlatOpKind)

TREND_DEGREE = 3
MAX_HARMONICS = 8


def trend_basis(n_coeffs, length, dtype=np.float64):
    t = np.arange(length, dtype=np.float64) / length
    return np.stack([t**p for p in range(n_coeffs)]).astype(dtype)  # [P, length]


def seasonal_basis(n_harmonics, length, dtype=np.float64):
    t = np.arange(length, dtype=np.float64) / length
    rows = [np.ones(length)]
    for m in range(1, n_harmonics + 1):
        rows.append(np.cos(2.0 * np.pi * m * t))
        rows.append(np.sin(2.0 * np.pi * m * t))
    return np.stack(rows).astype(dtype)  # [1 + 2M, length]


def nbeats_basis(kind, theta, length):
    """Expand basis coefficients theta [..., P] to a curve [..., length]."""
    width = theta.shape[-1]
    if kind == "generic" or kind == FlatOpKind.NBeatsGeneric:
        if width != length:
            raise ShapeError(f"generic basis: theta width {width} != length {length}")
        return theta
    if kind == "trend" or kind == FlatOpKind.NBeatsTrend:
        basis = trend_basis(width, length, dtype=theta.dtype)
    elif kind == "seasonal" or kind == FlatOpKind.NBeatsSeasonal:
        if width % 2 == 0:
            raise ShapeError(f"seasonal basis: theta width {width} must be odd (1 + 2*harmonics)")
        basis = seasonal_basis((width - 1) // 2, length, dtype=theta.dtype)
    else:
        raise ValueError(f"unknown basis kind {kind}")
    return T.matmul(theta, Tensor(basis))


class NBeatsBackbone(Module):
    """FC stack shared by the generic/trend/seasonal variants on one edge."""

    def __init__(self, L, width, rng: Rng, dtype=np.float32):
        super().__init__()
        self.fc1 = Linear(L, width, rng.child("fc1"), dtype=dtype)
        self.fc2 = Linear(width, width, rng.child("fc2"), dtype=dtype)

    def __call__(self, x):
        return T.relu(self.fc2(T.relu(self.fc1(x))))


class LinearFlatOp(Module):
    """forecast <- linear(concat(backcast, forecast)); backcast unchanged.

    Non-final edges get an activation and a layer norm on the new stream.
    """

    def __init__(self, L, H, rng: Rng, is_final=False, dtype=np.float32):
        super().__init__()
        self.is_final = is_final
        self.lin = Linear(L + H, H, rng.child("lin"), dtype=dtype)
        if not is_final:
            self.norm = LayerNorm(H, dtype=dtype)

    def __call__(self, backcast, forecast):
        z = T.concat([backcast, forecast], axis=-1)
        out = self.lin(z)
        if not self.is_final:
            out = self.norm(T.relu(out))
        return backcast, out


class NBeatsFlatOp(Module):
    """One residual block: shared backbone, per-variant theta projections.

    Edges into the network's final output node skip the backcast head: the
    final backcast stream feeds nothing, so its projection would be dead
    weight.
    """

    def __init__(
        self,
        kind: FlatOpKind,
        backbone: NBeatsBackbone,
        L,
        H,
        rng: Rng,
        is_final=False,
        dtype=np.float32,
    ):
        super().__init__()
        self.kind = kind
        self.backbone = backbone
        self.is_final = is_final
        width = backbone.fc2.weight.shape[1]
        if kind == FlatOpKind.NBeatsGeneric:
            pb, pf = L, H
            self.basis_kind = "generic"
        elif kind == FlatOpKind.NBeatsTrend:
            pb = pf = TREND_DEGREE + 1
            self.basis_kind = "trend"
        elif kind == FlatOpKind.NBeatsSeasonal:
            harm = max(1, min(H // 2, MAX_HARMONICS))
            pb = pf = 1 + 2 * harm
            self.basis_kind = "seasonal"
        else:
            raise ValueError(f"{kind} is not an N-BEATS variant")
        self.L = L
        self.H = H
        if not is_final:
            self.theta_b = Linear(width, pb, rng.child("theta_b"), dtype=dtype, bias=False)
        self.theta_f = Linear(width, pf, rng.child("theta_f"), dtype=dtype, bias=False)
        # static basis matrices, built once
        if kind == FlatOpKind.NBeatsGeneric:
            self._basis_b = self._basis_f = None
        elif kind == FlatOpKind.NBeatsTrend:
            self._basis_b = Tensor(trend_basis(pb, L, dtype=dtype))
            self._basis_f = Tensor(trend_basis(pf, H, dtype=dtype))
        else:
            harm_ = (pb - 1) // 2
            self._basis_b = Tensor(seasonal_basis(harm_, L, dtype=dtype))
            self._basis_f = Tensor(seasonal_basis(harm_, H, dtype=dtype))

    def _expand(self, theta, basis):
        if basis is None:  # generic: theta is the curve
            return theta
        return T.matmul(theta, basis)

    def __call__(self, backcast, forecast):
        h = self.backbone(backcast)
        fore_hat = self._expand(self.theta_f(h), self._basis_f)
        if self.is_final:
            return backcast, T.add(forecast, fore_hat)
        back_hat = self._expand(self.theta_b(h), self._basis_b)
        return T.sub(backcast, back_hat), T.add(forecast, fore_hat)


class SkipFlatOp(Module):
    def __call__(self, backcast, forecast):
        return backcast, forecast


def make_flat_op(kind: FlatOpKind, L, H, rng: Rng, backbone=None, is_final=False, dtype=np.float32):
    if kind == FlatOpKind.Linear:
        return LinearFlatOp(L, H, rng, is_final=is_final, dtype=dtype)
    if kind == FlatOpKind.Skip:
        return SkipFlatOp()
    if backbone is None:
        raise ValueError("N-BEATS variants need the edge-shared backbone")
    return NBeatsFlatOp(kind, backbone, L, H, rng, is_final=is_final, dtype=dtype)
