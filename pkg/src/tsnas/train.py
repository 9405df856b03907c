"""Retrain a genotype from scratch, evaluate on the test split, profile."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import TimeSeriesDataset, chrono_split, gather_batch, iter_batches, standardize, window_starts
from .genotype import Genotype
from .network import ForecastNetwork, NetworkConfig, build_discrete
from .optim import Adam, clip_grad_norm
from .rng import Rng
from .tensor import ContractError, GradTape, NumericFault, no_grad


@dataclass
class TrainConfig:
    max_epochs: int = 100
    patience: int = 10
    batch_size: int = 32
    lr: float = 1e-3
    clip_norm: float = 5.0
    stride: int = 1
    ratios: tuple = (0.7, 0.1, 0.2)
    max_steps_per_epoch: int | None = None


@dataclass
class TrainReport:
    seed: int
    train_losses: list = field(default_factory=list)
    val_losses: list = field(default_factory=list)
    best_epoch: int = -1
    test_mse: float = float("nan")
    test_mae: float = float("nan")
    wallclock: float = 0.0
    genotype_hash: str = ""
    n_params: int = 0
    diverged: bool = False

    def to_json(self):
        return dict(self.__dict__)


@dataclass
class ProfileReport:
    parameter_count: int
    forward_seconds: float
    forward_backward_seconds: float
    peak_live_bytes: int
    batch_size: int
    lookback: int
    horizon: int
    n_targets: int

    def to_json(self):
        return dict(self.__dict__)


def config_for_genotype(genotype: Genotype, L=None, H=None, dtype=None) -> NetworkConfig:
    """Rebuild the network config echoed in the genotype, optionally resized."""
    d = dict(genotype.search_space)
    if L is not None:
        d["L"] = L
    if H is not None:
        d["H"] = H
    if dtype is not None:
        d["dtype"] = dtype
    return NetworkConfig.from_json(d)


def evaluate(net: ForecastNetwork, batches):
    """(MSE, MAE) of point forecasts over all windows, eval mode."""
    net.eval()
    se, ae, count = 0.0, 0.0, 0
    for batch in batches:
        with no_grad():
            out = net.forward(
                batch.past_targets,
                past_features=batch.past_features,
                future_features=batch.future_features,
            )
        err = out.point.numpy().astype(np.float64) - batch.future_targets
        se += float((err**2).sum())
        ae += float(np.abs(err).sum())
        count += err.size
    if count == 0:
        raise ContractError("evaluate: empty test set")
    return se / count, ae / count


def _mean_loss(net, batches):
    net.eval()
    total, n = 0.0, 0
    for batch in batches:
        with no_grad():
            loss, _ = net.loss(
                batch.past_targets,
                batch.future_targets,
                past_features=batch.past_features,
                future_features=batch.future_features,
            )
        total += loss.item() * batch.batch_size
        n += batch.batch_size
    return total / max(n, 1)


def live_weight_parameters(net: ForecastNetwork):
    """Parameters reachable from the loss, found by one probe backward.

    A discrete genotype can leave a few registered tensors with no path to
    the loss (e.g. backcast projections whose stream dies in pass-through
    edges); the optimizer must only see the live ones.
    """
    cfg = net.config
    rng = Rng(0, "probe")
    x = rng.normal((2, cfg.L, cfg.n_targets), dtype=np.float64).astype(cfg.np_dtype)
    y = rng.normal((2, cfg.H, cfg.n_targets), dtype=np.float64).astype(cfg.np_dtype)
    pf = (
        rng.normal((2, cfg.L, cfg.n_past_features), dtype=np.float64).astype(cfg.np_dtype)
        if cfg.n_past_features
        else None
    )
    ff = (
        rng.normal((2, cfg.H, cfg.n_future_features), dtype=np.float64).astype(cfg.np_dtype)
        if cfg.n_future_features
        else None
    )
    named = net.weight_parameters()
    was_training = net.training
    net.eval()
    for _, p in named:
        p.grad = None
    with GradTape() as tape:
        loss, _ = net.loss(x, y, past_features=pf, future_features=ff)
    tape.backward(loss)
    live = [(n, p) for n, p in named if p.grad is not None]
    for _, p in named:
        p.grad = None
    net.set_training(was_training)
    return live


def train_genotype(
    genotype: Genotype, dataset: TimeSeriesDataset, config: TrainConfig, seed: int, H=None, log=None
):
    """Fresh-initialized training with early stopping on the validation split.

    Test metrics are computed once, on the weights of the best validation
    epoch, in globally standardized space.
    """
    cfg_net = config_for_genotype(genotype, H=H)
    tr, va, te = chrono_split(dataset, "final", cfg_net.L, cfg_net.H, config.ratios)
    ds, _scaler = standardize(dataset, tr)
    net = build_discrete(genotype, cfg_net, seed=seed)
    params = [p for _, p in live_weight_parameters(net)]
    opt = Adam(params, lr=config.lr)
    shuffle_rng = Rng(seed, "train/shuffle")

    L, H_ = cfg_net.L, cfg_net.H
    val_batches = list(iter_batches(ds, va, L, H_, config.batch_size, config.stride))
    test_batches = list(iter_batches(ds, te, L, H_, config.batch_size, config.stride))

    report = TrainReport(
        seed=seed,
        genotype_hash=genotype.digest(),
        n_params=sum(p.size for _, p in net.weight_parameters()),
    )
    best_val = float("inf")
    best_weights = None
    bad_epochs = 0
    t0 = time.time()
    for epoch in range(config.max_epochs):
        net.train()
        losses = []
        try:
            for step, batch in enumerate(
                iter_batches(
                    ds, tr, L, H_, config.batch_size, config.stride, shuffle=True, rng=shuffle_rng
                )
            ):
                for p in params:
                    p.grad = None
                with GradTape() as tape:
                    loss, _ = net.loss(
                        batch.past_targets,
                        batch.future_targets,
                        past_features=batch.past_features,
                        future_features=batch.future_features,
                    )
                tape.backward(loss)
                clip_grad_norm(params, config.clip_norm)
                opt.step()
                losses.append(loss.item())
                if config.max_steps_per_epoch and step + 1 >= config.max_steps_per_epoch:
                    break
        except NumericFault:
            report.diverged = True
            break
        val = _mean_loss(net, val_batches)
        report.train_losses.append(float(np.mean(losses)))
        report.val_losses.append(val)
        if log is not None:
            log({"epoch": epoch, "train_loss": report.train_losses[-1], "val_loss": val})
        if val < best_val:
            best_val = val
            report.best_epoch = epoch
            best_weights = {n: p.data.copy() for n, p in net.weight_parameters()}
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.patience:
                break
    if best_weights is not None:
        for n, p in net.weight_parameters():
            p.data = best_weights[n]
    report.test_mse, report.test_mae = evaluate(net, test_batches)
    report.wallclock = time.time() - t0
    return report, net, ds, te


def naive_baselines(batches, season=None):
    """Repeat-last-value and seasonal-naive metrics over the same windows."""
    stats = {"repeat_last": [0.0, 0.0, 0], "seasonal_naive": [0.0, 0.0, 0]}
    for batch in batches:
        past, future = batch.past_targets, batch.future_targets
        H = future.shape[1]
        last = past[:, -1:, :]
        err = np.broadcast_to(last, future.shape) - future
        stats["repeat_last"][0] += float((err**2).sum())
        stats["repeat_last"][1] += float(np.abs(err).sum())
        stats["repeat_last"][2] += err.size
        p = season or past.shape[1]
        p = min(p, past.shape[1])
        tail = past[:, -p:, :]
        reps = int(np.ceil(H / p))
        sn = np.tile(tail, (1, reps, 1))[:, :H, :]
        err = sn - future
        stats["seasonal_naive"][0] += float((err**2).sum())
        stats["seasonal_naive"][1] += float(np.abs(err).sum())
        stats["seasonal_naive"][2] += err.size
    out = {}
    for k, (se, ae, n) in stats.items():
        out[k] = {"mse": se / max(n, 1), "mae": ae / max(n, 1)}
    return out


def profile(net: ForecastNetwork, B, L, H, repetitions=5, seed=0):
    """Parameter count, forward / forward+backward wall-clock medians, and a
    live-tensor-bytes peak as the memory proxy."""
    if repetitions < 3:
        raise ContractError("profile: need at least 3 repetitions for a median")
    cfg = net.config
    rng = Rng(seed, "profile")
    x = rng.normal((B, L, cfg.n_targets), dtype=np.float64).astype(cfg.np_dtype)
    y = rng.normal((B, H, cfg.n_targets), dtype=np.float64).astype(cfg.np_dtype)
    net.eval()
    with no_grad():
        net.forward(x)  # warmup
    fwd_times, bwd_times = [], []
    T.reset_peak_bytes()
    for _ in range(repetitions):
        t0 = time.perf_counter()
        with no_grad():
            net.forward(x)
        fwd_times.append(time.perf_counter() - t0)
    net.train()
    params = [p for _, p in net.weight_parameters()]
    for _ in range(repetitions):
        for p in params:
            p.grad = None
        t0 = time.perf_counter()
        with GradTape() as tape:
            loss, _ = net.loss(x, y)
        tape.backward(loss)
        bwd_times.append(time.perf_counter() - t0)
    for p in params:
        p.grad = None
    return ProfileReport(
        parameter_count=sum(p.size for p in params),
        forward_seconds=float(np.median(fwd_times)),
        forward_backward_seconds=float(np.median(bwd_times)),
        peak_live_bytes=T.peak_bytes(),
        batch_size=B,
        lookback=L,
        horizon=H,
        n_targets=cfg.n_targets,
    )
