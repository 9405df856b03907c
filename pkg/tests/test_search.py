import numpy as np
import pytest

from conftest import tiny_config
from tsnas.data import iter_batches, make_synthetic, split_search_data, standardize
from tsnas.network import ForecastNetwork, NetworkConfig
from tsnas.optim import Adam, SGDMomentum
from tsnas.rng import Rng
from tsnas.search import (
    SearchConfig,
    load_checkpoint,
    run_search,
    save_checkpoint,
    search_step,
)
from tsnas.tensor import ContractError


def small_setup(seed=0, dropout=0.0):
    ds = make_synthetic("sine", T=120, N=2, noise=0.05, seed=3)
    net_cfg = tiny_config(dropout=dropout, dtype="float32")
    cfg = SearchConfig(epochs=2, batch_size=8, L=8, H=4, stride=2, seed=seed, max_steps_per_epoch=2)
    return ds, net_cfg, cfg


def batches_for(net_cfg, ds, cfg):
    tr, va = split_search_data(ds.T, cfg.L, cfg.H)
    dss, _ = standardize(ds, tr)
    tb = next(iter_batches(dss, tr, cfg.L, cfg.H, cfg.batch_size))
    vb = next(iter_batches(dss, va, cfg.L, cfg.H, cfg.batch_size))
    return tb, vb


def test_search_step_parameter_partition():
    """Arch steps leave weights bit-identical; weight steps leave arch bits."""
    ds, net_cfg, cfg = small_setup(dropout=0.1)
    net = ForecastNetwork(net_cfg, Rng(0, "net"))
    tb, vb = batches_for(net_cfg, ds, cfg)
    w_params = [p for _, p in net.weight_parameters()]
    a_params = [p for _, p in net.arch_parameters()]
    assert not set(map(id, w_params)) & set(map(id, a_params))
    w_opt = SGDMomentum(w_params, lr=0.01)
    a_opt = Adam(a_params, lr=1e-2)

    w_before = [p.data.copy() for p in w_params]
    a_before = [p.data.copy() for p in a_params]
    search_step(net, w_opt, a_opt, tb, vb)
    # both should have moved after a combined step
    assert any(not np.array_equal(b, p.data) for b, p in zip(w_before, w_params))
    assert any(not np.array_equal(b, p.data) for b, p in zip(a_before, a_params))

    # arch-only step: weight tensors bit-identical
    w_before = [p.data.copy() for p in w_params]
    zero_w = SGDMomentum(w_params, lr=0.0, momentum=0.0)
    search_step(net, zero_w, a_opt, tb, vb)
    assert all(np.array_equal(b, p.data) for b, p in zip(w_before, w_params))

    # weight-only step: arch tensors bit-identical
    a_before = [p.data.copy() for p in a_params]
    zero_a = Adam(a_params, lr=0.0)
    search_step(net, w_opt, zero_a, tb, vb)
    assert all(np.array_equal(b, p.data) for b, p in zip(a_before, a_params))


def test_arch_step_uses_eval_mode_deterministically():
    """With dropout present, repeated arch steps on the same batch produce
    identical validation losses (lr=0 keeps parameters in place)."""
    ds, net_cfg, cfg = small_setup(dropout=0.5)
    net = ForecastNetwork(net_cfg, Rng(0, "net"))
    tb, vb = batches_for(net_cfg, ds, cfg)
    w_opt = SGDMomentum([p for _, p in net.weight_parameters()], lr=0.0, momentum=0.0)
    a_opt = Adam([p for _, p in net.arch_parameters()], lr=0.0)
    _, v1 = search_step(net, w_opt, a_opt, tb, vb)
    _, v2 = search_step(net, w_opt, a_opt, tb, vb)
    assert v1 == v2
    # train-mode losses differ across calls while dropout masks are live
    t1, _ = search_step(net, w_opt, a_opt, tb, vb)
    t2, _ = search_step(net, w_opt, a_opt, tb, vb)
    assert t1 != t2


def test_first_order_arch_step_matches_plain_gradient():
    """An arch step is a plain Adam step on L_val wrt arch with weights frozen."""
    ds, _, cfg = small_setup()
    net_cfg = tiny_config(dtype="float64")
    net = ForecastNetwork(net_cfg, Rng(0, "net"))
    tb, vb = batches_for(net_cfg, ds, cfg)
    from tsnas.gradcheck import finite_difference_grad
    from tsnas.tensor import GradTape, no_grad

    net.eval()
    for _, p in net.arch_parameters():
        p.grad = None
    with GradTape() as tape:
        loss, _ = net.loss(vb.past_targets, vb.future_targets)
    tape.backward(loss)
    name, p = net.arch_parameters()[0]

    def f_of_logits(vals):
        orig = p.data.copy()
        p.data = vals.numpy().astype(p.data.dtype)
        with no_grad():
            l, _ = net.loss(vb.past_targets, vb.future_targets)
        p.data = orig
        return l.item()

    from tsnas.tensor import Tensor

    numeric = finite_difference_grad(f_of_logits, Tensor(p.data.astype(np.float64)), h=1e-3)
    denom = np.maximum(np.abs(numeric), np.maximum(np.abs(p.grad), 1e-3))
    assert (np.abs(p.grad - numeric) / denom).max() <= 1e-3


def test_run_search_deterministic():
    ds, net_cfg, cfg = small_setup(seed=5)
    r1 = run_search(cfg, ds, net_cfg)
    r2 = run_search(cfg, ds, net_cfg)
    for (n1, p1), (n2, p2) in zip(r1.net.arch_parameters(), r2.net.arch_parameters()):
        assert n1 == n2
        np.testing.assert_array_equal(p1.data, p2.data)

    def strip(history):
        return [{k: v for k, v in rec.items() if k != "seconds"} for rec in history]

    assert strip(r1.history) == strip(r2.history)


def test_run_search_history_and_entropy():
    ds, net_cfg, cfg = small_setup()
    res = run_search(cfg, ds, net_cfg)
    assert len(res.history) == cfg.epochs
    for rec in res.history:
        assert np.isfinite(rec["train_loss"]) and np.isfinite(rec["val_loss"])
        assert rec["entropy"]
        assert all(np.isfinite(v) for v in rec["entropy"].values())


def test_val_windows_strictly_after_train_windows():
    ds, net_cfg, cfg = small_setup()
    tr, va = split_search_data(ds.T, cfg.L, cfg.H)
    from tsnas.data import window_starts

    train_starts = window_starts(tr, cfg.L, cfg.H)
    val_starts = window_starts(va, cfg.L, cfg.H)
    # every train window's forecast target ends at or before the split point
    assert (train_starts + cfg.L + cfg.H <= tr[1]).all()
    assert (val_starts >= tr[1]).all()


def test_degenerate_config_rejected():
    with pytest.raises(ContractError):
        SearchConfig(epochs=0)
    with pytest.raises(ContractError):
        NetworkConfig(L=8, H=4, n_targets=2, n_intermediate=0)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    ds, net_cfg, cfg = small_setup()
    net_cfg_f64 = tiny_config(dtype="float64")
    res = run_search(cfg, ds, net_cfg_f64)
    net = res.net
    net.arch.freeze(("head",), 1)
    net.arch.remove_edge(("flat", 0, 4, 0))
    path = tmp_path / "ckpt.npz"
    rngs = {"shuffle": Rng(3, "s")}
    save_checkpoint(str(path), net, epoch=7, rngs=rngs)

    net2 = ForecastNetwork(net_cfg_f64, Rng(99, "net"))
    rngs2 = {"shuffle": Rng(123, "other")}
    epoch = load_checkpoint(str(path), net2, rngs=rngs2)
    assert epoch == 7
    for (n1, p1), (n2, p2) in zip(net.weight_parameters(), net2.weight_parameters()):
        assert n1 == n2
        np.testing.assert_array_equal(p1.data, p2.data)
    for (n1, p1), (n2, p2) in zip(net.arch_parameters(), net2.arch_parameters()):
        np.testing.assert_array_equal(p1.data, p2.data)
    assert net2.arch.frozen == {("head",): 1}
    assert net2.arch.removed_edges == {("flat", 0, 4, 0)}
    assert rngs2["shuffle"].get_state() == rngs["shuffle"].get_state()
