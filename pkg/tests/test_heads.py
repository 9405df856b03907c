import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from tsnas.heads import (
    HeadKind,
    QUANTILES,
    head_loss,
    mae_loss,
    make_head,
    mse_loss,
    pinball_loss,
    point_forecast,
)
from tsnas.rng import Rng
from tsnas.tensor import Tensor


def test_pinball_unit_errors():
    y = Tensor(np.array([[[1.0]]]))
    yhat = Tensor(np.zeros((1, 1, 1, 1)))
    # only q=0.9: e = 1 -> 0.9
    assert abs(pinball_loss(yhat, y, quantiles=(0.9,)).item() - 0.9) < 1e-12
    y0 = Tensor(np.array([[[0.0]]]))
    yhat1 = Tensor(np.ones((1, 1, 1, 1)))
    assert abs(pinball_loss(yhat1, y0, quantiles=(0.9,)).item() - 0.1) < 1e-12


def test_losses_zero_at_perfect_forecast(rng):
    y = Tensor(rng.normal(size=(2, 3, 2)))
    q = Tensor(np.repeat(y.numpy()[..., None], 3, axis=-1))
    assert pinball_loss(q, y).item() == 0.0
    assert mse_loss(y, y).item() == 0.0
    assert mae_loss(y, y).item() == 0.0


def test_mse_example():
    y = Tensor(np.array([0.0, 2.0]))
    yhat = Tensor(np.array([0.0, 0.0]))
    assert mse_loss(yhat, y).item() == 2.0


@given(st.integers(min_value=0, max_value=10_000))
@settings(max_examples=50, deadline=None)
def test_pinball_half_is_half_mae(seed):
    rng = np.random.default_rng(seed)
    y = Tensor(rng.normal(size=(2, 4, 3)))
    f = rng.normal(size=(2, 4, 3))
    q = Tensor(f[..., None])
    lhs = pinball_loss(q, y, quantiles=(0.5,)).item()
    rhs = 0.5 * mae_loss(Tensor(f), y).item()
    assert lhs == rhs  # exact: max(.5e, -.5e) == .5|e|


def test_quantile_head_shape():
    head = make_head(HeadKind.Quantile, d_model=5, n_targets=3, rng=Rng(0, "h"))
    out = head(Tensor(np.random.default_rng(0).normal(size=(2, 4, 5)).astype(np.float32)))
    assert out.shape == (2, 4, 3, len(QUANTILES))


def test_point_forecast_is_median_channel(rng):
    out = Tensor(rng.normal(size=(2, 4, 3, 3)))
    np.testing.assert_array_equal(point_forecast(HeadKind.Quantile, out).numpy(), out.numpy()[..., 1])
    p = Tensor(rng.normal(size=(2, 4, 3)))
    assert point_forecast(HeadKind.MSE, p) is p


def test_mse_head_zero_weights_constant_bias(rng):
    head = make_head(HeadKind.MSE, d_model=4, n_targets=2, rng=Rng(1, "h"))
    head.layer.weight.data[:] = 0.0
    head.layer.bias.data[:] = [3.0, -1.0]
    out = head(Tensor(rng.normal(size=(2, 5, 4)).astype(np.float32)))
    np.testing.assert_allclose(out.numpy()[..., 0], 3.0, atol=1e-6)
    np.testing.assert_allclose(out.numpy()[..., 1], -1.0, atol=1e-6)


def test_head_loss_dispatch(rng):
    y = Tensor(rng.normal(size=(1, 2, 2)))
    assert head_loss(HeadKind.MSE, y, y).item() == 0.0
    assert head_loss(HeadKind.MAE, y, y).item() == 0.0
    q = Tensor(np.repeat(y.numpy()[..., None], 3, axis=-1))
    assert head_loss(HeadKind.Quantile, q, y).item() == 0.0
