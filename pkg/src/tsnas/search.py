"""Alternating first-order search: weights on the first half of the series,
architecture parameters on the tail half, with eval-mode architecture steps.
"""

from __future__ import annotations

import io
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .data import TimeSeriesDataset, iter_batches, split_search_data, standardize, window_starts
from .network import ForecastNetwork, MacroMode, NetworkConfig
from .optim import Adam, SGDMomentum, clip_grad_norm, cosine_lr
from .rng import Rng
from .tensor import ContractError, GradTape, NumericFault


class SearchError(RuntimeError):
    pass


@dataclass
class SearchConfig:
    epochs: int = 5
    batch_size: int = 32
    L: int = 96
    H: int = 24
    stride: int = 1
    seed: int = 0
    weight_lr: float = 0.025
    weight_lr_min: float = 1e-3
    weight_momentum: float = 0.9
    weight_decay: float = 3e-4
    arch_lr: float = 3e-4
    arch_betas: tuple = (0.5, 0.999)
    arch_weight_decay: float = 1e-3
    clip_norm: float = 5.0
    max_steps_per_epoch: int | None = None
    val_batch_size: int | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError("SearchConfig: epochs must be >= 1")
        if self.L < 1 or self.H < 1:
            raise ContractError("SearchConfig: L and H must be positive")


def _zero_all(net):
    for _, p in net.weight_parameters():
        p.grad = None
    for _, p in net.arch_parameters():
        p.grad = None


def search_step(net, w_opt, a_opt, train_batch, val_batch, clip_norm=5.0, weight_lr=None):
    """One architecture step (eval mode, val data) then one weight step.

    The two parameter sets are disjoint; each step consumes only its own
    grads, and the other set's tensors are left bit-identical.
    """
    # (a) architecture step: dropout/norm behave as at inference
    net.eval()
    _zero_all(net)
    with GradTape() as tape:
        val_loss, _ = net.loss(
            val_batch.past_targets,
            val_batch.future_targets,
            past_features=val_batch.past_features,
            future_features=val_batch.future_features,
        )
    tape.backward(val_loss)
    clip_grad_norm([p for _, p in net.arch_parameters()], clip_norm)
    a_opt.step()

    # (b) weight step on the training half
    net.train()
    _zero_all(net)
    with GradTape() as tape:
        train_loss, _ = net.loss(
            train_batch.past_targets,
            train_batch.future_targets,
            past_features=train_batch.past_features,
            future_features=train_batch.future_features,
        )
    tape.backward(train_loss)
    clip_grad_norm([p for _, p in net.weight_parameters()], clip_norm)
    w_opt.step(lr=weight_lr)
    _zero_all(net)
    return float(train_loss.item()), float(val_loss.item())


@dataclass
class SearchResult:
    net: ForecastNetwork
    history: list = field(default_factory=list)
    scaler: object = None
    val_range: tuple = (0, 0)
    dataset: TimeSeriesDataset | None = None


def run_search(
    config: SearchConfig,
    dataset: TimeSeriesDataset,
    net_config: NetworkConfig,
    checkpoint_path=None,
    log=None,
) -> SearchResult:
    """Alternate search steps for config.epochs; checkpoint every epoch."""
    train_range, val_range = split_search_data(dataset.T, config.L, config.H)
    ds, scaler = standardize(dataset, train_range)
    rng = Rng(config.seed, "search")
    net = ForecastNetwork(net_config, Rng(config.seed, "net"))

    w_params = [p for _, p in net.weight_parameters()]
    a_params = [p for _, p in net.arch_parameters()]
    if set(map(id, w_params)) & set(map(id, a_params)):
        raise ContractError("weight and architecture parameter sets overlap")
    w_opt = SGDMomentum(
        w_params, lr=config.weight_lr, momentum=config.weight_momentum, weight_decay=config.weight_decay
    )
    a_opt = Adam(
        a_params,
        lr=config.arch_lr,
        betas=config.arch_betas,
        weight_decay=config.arch_weight_decay,
    )

    val_bs = config.val_batch_size or config.batch_size
    n_train = len(window_starts(train_range, config.L, config.H, config.stride))
    if n_train == 0:
        raise SearchError("no training windows fit the search split")

    history = []
    shuffle_rng = rng.child("shuffle")
    for epoch in range(config.epochs):
        lr_now = cosine_lr(config.weight_lr, epoch, config.epochs, config.weight_lr_min)
        val_iter = iter_batches(ds, val_range, config.L, config.H, val_bs, config.stride)
        val_cache = list(val_iter)
        if not val_cache:
            raise SearchError("no validation windows fit the search split")
        t0 = time.time()
        tr_losses, va_losses = [], []
        step = 0
        for train_batch in iter_batches(
            ds,
            train_range,
            config.L,
            config.H,
            config.batch_size,
            config.stride,
            shuffle=True,
            rng=shuffle_rng,
        ):
            val_batch = val_cache[step % len(val_cache)]
            try:
                tr, va = search_step(
                    net, w_opt, a_opt, train_batch, val_batch, config.clip_norm, weight_lr=lr_now
                )
            except NumericFault as e:
                raise SearchError(f"non-finite loss at epoch {epoch}, step {step}: {e}") from e
            tr_losses.append(tr)
            va_losses.append(va)
            step += 1
            if config.max_steps_per_epoch and step >= config.max_steps_per_epoch:
                break
        entropy = net.arch.entropy()
        record = {
            "epoch": epoch,
            "train_loss": float(np.mean(tr_losses)),
            "val_loss": float(np.mean(va_losses)),
            "entropy": entropy,
            "weight_lr": lr_now,
            "steps": step,
            "seconds": round(time.time() - t0, 3),
        }
        history.append(record)
        if log is not None:
            log(record)
        if checkpoint_path is not None:
            save_checkpoint(
                checkpoint_path, net, w_opt, a_opt, epoch, rngs={"shuffle": shuffle_rng}
            )
    return SearchResult(net=net, history=history, scaler=scaler, val_range=val_range, dataset=ds)


# ---------------------------------------------------------------------------
# checkpointing: one .npz holding every tensor plus a JSON manifest


def save_checkpoint(path, net, w_opt=None, a_opt=None, epoch=0, rngs=None):
    arrays = {}
    for name, p in net.weight_parameters():
        arrays[f"w::{name}"] = p.data
    for name, p in net.arch_parameters():
        arrays[f"a::{name}"] = p.data
    if w_opt is not None:
        for k, v in w_opt.state_dict().items():
            arrays[f"wopt::{k}"] = np.asarray(v)
    if a_opt is not None:
        for k, v in a_opt.state_dict().items():
            arrays[f"aopt::{k}"] = np.asarray(v)
    manifest = {
        "version": 1,
        "epoch": epoch,
        "frozen": [[list(map(str, k)), v] for k, v in getattr(net.arch, "frozen", {}).items()],
        "removed_edges": [list(map(str, e)) for e in getattr(net.arch, "removed_edges", set())],
        "rng_states": {k: r.get_state() for k, r in (rngs or {}).items()},
    }
    arrays["manifest"] = np.frombuffer(json.dumps(manifest).encode(), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path, net, w_opt=None, a_opt=None, rngs=None):
    with np.load(path) as zf:
        arrays = {k: zf[k] for k in zf.files}
    manifest = json.loads(bytes(arrays.pop("manifest")).decode())
    wmap = dict(net.weight_parameters())
    amap = dict(net.arch_parameters())
    for key, arr in arrays.items():
        tag, name = key.split("::", 1)
        if tag == "w":
            wmap[name].data = arr.copy()
        elif tag == "a":
            amap[name].data = arr.copy()
    if w_opt is not None:
        w_opt.load_state_dict(
            {k.split("::", 1)[1]: v for k, v in arrays.items() if k.startswith("wopt::")}
        )
    if a_opt is not None:
        a_opt.load_state_dict(
            {k.split("::", 1)[1]: v for k, v in arrays.items() if k.startswith("aopt::")}
        )
    if hasattr(net.arch, "frozen"):
        net.arch.frozen = {tuple(_detuple(k)): int(v) for k, v in manifest["frozen"]}
        net.arch.removed_edges = {tuple(_detuple(e)) for e in manifest["removed_edges"]}
    for k, state in manifest.get("rng_states", {}).items():
        if rngs and k in rngs:
            rngs[k].set_state(state)
    return manifest["epoch"]


def _detuple(parts):
    out = []
    for p in parts:
        try:
            out.append(int(p))
        except ValueError:
            out.append(p)
    return out
