"""Forecasting heads and their losses: quantile (pinball), MSE, MAE."""

from __future__ import annotations

from enum import Enum

import numpy as np

from . import tensor as T
from .nn import Linear, Module
from .rng import Rng
from .tensor import Tensor


class HeadKind(str, Enum):
    Quantile = "Quantile"
    MSE = "MSE"
    MAE = "MAE"


QUANTILES = (0.1, 0.5, 0.9)


class QuantileHead(Module):
    """One linear layer per quantile; point forecast is the 0.5 channel."""

    def __init__(self, d_model, n_targets, rng: Rng, dtype=np.float32):
        super().__init__()
        from .nn import ModuleList

        self.layers = ModuleList(
            [Linear(d_model, n_targets, rng.child(f"q{q}"), dtype=dtype) for q in QUANTILES]
        )

    def __call__(self, z):
        # z: [B, H, d] -> [B, H, N, |q|]
        return T.stack([layer(z) for layer in self.layers], axis=-1)


class PointHead(Module):
    """Single linear layer for MSE/MAE-trained heads."""

    def __init__(self, d_model, n_targets, rng: Rng, dtype=np.float32):
        super().__init__()
        self.layer = Linear(d_model, n_targets, rng, dtype=dtype)

    def __call__(self, z):
        return self.layer(z)


def make_head(kind: HeadKind, d_model, n_targets, rng: Rng, dtype=np.float32):
    if kind == HeadKind.Quantile:
        return QuantileHead(d_model, n_targets, rng, dtype=dtype)
    return PointHead(d_model, n_targets, rng, dtype=dtype)


def point_forecast(kind: HeadKind, forecast):
    """Extract the point prediction from a head output."""
    if kind == HeadKind.Quantile:
        return forecast[..., 1]  # the 0.5 quantile channel
    return forecast


def pinball_loss(forecast, y, quantiles=QUANTILES):
    """Mean over elements and quantiles of max(q*e, (q-1)*e), e = y - yhat.

    forecast: [B, H, N, |q|], y: [B, H, N].
    """
    q = Tensor(np.asarray(quantiles, dtype=y.dtype))
    e = T.sub(T.reshape(y, y.shape + (1,)), forecast)
    return T.tmean(T.maximum(T.mul(q, e), T.mul(T.sub(q, 1.0), e)))


def mse_loss(forecast, y):
    d = T.sub(forecast, y)
    return T.tmean(T.mul(d, d))


def mae_loss(forecast, y):
    return T.tmean(T.tabs(T.sub(forecast, y)))


def head_loss(kind: HeadKind, forecast, y):
    if kind == HeadKind.Quantile:
        return pinball_loss(forecast, y)
    if kind == HeadKind.MSE:
        return mse_loss(forecast, y)
    if kind == HeadKind.MAE:
        return mae_loss(forecast, y)
    raise ValueError(f"unknown head kind {kind}")
