import numpy as np
import pytest

from tsnas.optim import Adam, SGDMomentum, adam_step, clip_grad_norm, cosine_lr
from tsnas.tensor import ContractError, Tensor


def param(val, grad=None):
    p = Tensor(np.asarray(val, dtype=np.float64), requires_grad=True)
    if grad is not None:
        p.grad = np.asarray(grad, dtype=np.float64)
    return p


def test_adam_first_step_matches_hand_evaluation():
    # single scalar, g=1, lr=0.1: bias-corrected update is -lr * 1/(1 + eps)
    p = param([0.0], grad=[1.0])
    opt = Adam([p], lr=0.1)
    opt.step()
    np.testing.assert_allclose(p.data, [-0.1], atol=1e-6)
    assert p.grad is None  # grads consumed


def test_adam_zero_grad_leaves_params_bit_identical():
    vals = np.array([1.5, -2.25, 0.125])
    p = param(vals.copy(), grad=np.zeros(3))
    Adam([p], lr=0.3).step()
    assert np.array_equal(p.data, vals)


def test_adam_constant_grad_monotone_decrease():
    p = param([1.0])
    opt = Adam([p], lr=0.05)
    prev = float(p.data[0])
    for _ in range(2):
        p.grad = np.ones(1)
        opt.step()
        assert float(p.data[0]) < prev
        prev = float(p.data[0])
    assert opt.state.step_count == 2


def test_adam_missing_grad_is_contract_error():
    p = param([1.0])
    with pytest.raises(ContractError):
        Adam([p]).step()


def test_adam_step_helper():
    p = param([0.0], grad=[1.0])
    opt = Adam([p], lr=0.1)
    adam_step([p], opt)
    np.testing.assert_allclose(p.data, [-0.1], atol=1e-6)


def test_adam_state_roundtrip():
    p = param([1.0], grad=[0.5])
    opt = Adam([p], lr=0.1)
    opt.step()
    saved = {k: np.copy(v) if isinstance(v, np.ndarray) else v for k, v in opt.state_dict().items()}
    p2 = param(p.data.copy())
    opt2 = Adam([p2], lr=0.1)
    opt2.load_state_dict(saved)
    p.grad = np.array([0.25])
    p2.grad = np.array([0.25])
    opt.step()
    opt2.step()
    assert np.array_equal(p.data, p2.data)


def test_sgd_momentum():
    p = param([1.0], grad=[1.0])
    opt = SGDMomentum([p], lr=0.1, momentum=0.9)
    opt.step()
    np.testing.assert_allclose(p.data, [0.9])
    p.grad = np.array([1.0])
    opt.step()  # buffer: 0.9*1 + 1 = 1.9
    np.testing.assert_allclose(p.data, [0.9 - 0.19])


def test_clip_grad_norm():
    p1 = param([0.0], grad=[3.0])
    p2 = param([0.0], grad=[4.0])
    norm = clip_grad_norm([p1, p2], max_norm=1.0)
    assert abs(norm - 5.0) < 1e-9
    total = np.sqrt(p1.grad**2 + p2.grad**2)
    np.testing.assert_allclose(total, 1.0, atol=1e-6)


def test_cosine_lr_endpoints():
    assert cosine_lr(0.1, 0, 10) == pytest.approx(0.1)
    assert cosine_lr(0.1, 9, 10, min_lr=0.001) == pytest.approx(0.001)
    mid = cosine_lr(0.1, 5, 11, min_lr=0.0)
    assert 0.0 < mid < 0.1
