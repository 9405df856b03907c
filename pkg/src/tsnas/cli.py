"""Command-line entry point: search, train, eval, profile, show.

Configuration is one JSON file whose keys mirror RunConfig. Seeds can be
overridden with the DARTS_TS_SEED environment variable. Progress goes to
stderr as line-delimited JSON; human summaries go to stdout. Exit codes:
0 success, 2 config/validation error, 3 runtime/numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .data import (
    DataError,
    iter_batches,
    load_registry,
    resolve_dataset,
    chrono_split,
    standardize,
)
from .genotype import Genotype, GenotypeError
from .network import MacroMode, NetworkConfig, build_discrete
from .pruning import PruneConfig, hierarchical_prune, write_audit_log
from .search import SearchConfig, SearchError, run_search
from .tensor import ContractError, NumericFault
from .train import TrainConfig, config_for_genotype, evaluate, naive_baselines, profile, train_genotype

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def log_event(event, **fields):
    rec = {"ts": round(time.time(), 3), "event": event}
    rec.update(fields)
    print(json.dumps(rec), file=sys.stderr, flush=True)


@dataclass
class RunConfig:
    dataset: str = ""
    registry: str | None = None
    mode: str = "Mixed"
    L: int = 96
    horizons: list = field(default_factory=lambda: [24])
    seeds: list = field(default_factory=lambda: [0])
    size_class: str | None = None
    out_dir: str = "runs"
    network: dict = field(default_factory=dict)
    search: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    prune: dict = field(default_factory=dict)
    split_ratios: list = field(default_factory=lambda: [0.7, 0.1, 0.2])


KNOWN_KEYS = set(RunConfig.__dataclass_fields__.keys())


def load_run_config(path):
    """Parse and fully validate; returns (config, error list)."""
    errors = []
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        return None, [f"config: file not found: {path}"]
    except json.JSONDecodeError as e:
        return None, [f"config: invalid JSON: {e}"]
    if not isinstance(raw, dict):
        return None, ["config: top level must be a JSON object"]
    for key in raw:
        if key not in KNOWN_KEYS:
            errors.append(f"config: unknown key {key!r}")
    cfg = RunConfig(**{k: v for k, v in raw.items() if k in KNOWN_KEYS})
    if not cfg.dataset:
        errors.append("config: 'dataset' is required (CSV path or registry name)")
    registry = None
    if cfg.registry:
        if not os.path.exists(cfg.registry):
            errors.append(f"config: registry path does not exist: {cfg.registry}")
        else:
            try:
                registry = load_registry(cfg.registry)
            except (DataError, json.JSONDecodeError) as e:
                errors.append(f"config: bad registry: {e}")
    if cfg.dataset and not (registry and cfg.dataset in registry):
        if not os.path.exists(cfg.dataset):
            errors.append(f"config: dataset path does not exist: {cfg.dataset}")
    try:
        MacroMode(cfg.mode)
    except ValueError:
        errors.append(f"config: unknown mode {cfg.mode!r}")
    if cfg.size_class not in (None, "big", "small"):
        errors.append(f"config: size_class must be 'big' or 'small', got {cfg.size_class!r}")
    if not cfg.horizons:
        errors.append("config: 'horizons' must be a non-empty list")
    if cfg.L < 1:
        errors.append("config: L must be positive")
    if any(h < 1 for h in cfg.horizons):
        errors.append("config: horizons must be positive")
    if not cfg.seeds:
        errors.append("config: 'seeds' must be a non-empty list")
    if len(cfg.split_ratios) != 3 or abs(sum(cfg.split_ratios) - 1.0) > 1e-9:
        errors.append("config: split_ratios must be three values summing to 1")
    env_seed = os.environ.get("DARTS_TS_SEED")
    if env_seed is not None:
        try:
            cfg.seeds = [int(env_seed)]
        except ValueError:
            errors.append(f"config: DARTS_TS_SEED must be an integer, got {env_seed!r}")
    return cfg, errors


def _load_dataset(cfg: RunConfig):
    registry = load_registry(cfg.registry) if cfg.registry else None
    return resolve_dataset(cfg.dataset, registry)


def _network_config(cfg: RunConfig, dataset, H):
    kw = dict(cfg.network)
    return NetworkConfig(
        L=cfg.L,
        H=H,
        n_targets=dataset.n_targets,
        mode=MacroMode(cfg.mode),
        size_class=cfg.size_class or kw.pop("size_class", None),
        **kw,
    )


def cmd_search(args):
    cfg, errors = load_run_config(args.config)
    if errors:
        for e in errors:
            print(e, file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seeds = [args.seed]
    os.makedirs(cfg.out_dir, exist_ok=True)
    dataset, _entry = _load_dataset(cfg)
    H = min(cfg.horizons)  # search once at the smallest horizon
    seed = cfg.seeds[0]
    net_cfg = _network_config(cfg, dataset, H)
    search_cfg = SearchConfig(L=cfg.L, H=H, seed=seed, **cfg.search)
    log_event("search_start", dataset=dataset.name, L=cfg.L, H=H, seed=seed)
    ckpt = os.path.join(cfg.out_dir, "supernet_checkpoint.npz")
    result = run_search(
        search_cfg, dataset, net_cfg, checkpoint_path=ckpt, log=lambda rec: log_event("epoch", **rec)
    )
    val_batches = list(
        iter_batches(
            result.dataset,
            result.val_range,
            cfg.L,
            H,
            search_cfg.val_batch_size or search_cfg.batch_size,
            search_cfg.stride,
        )
    )
    prune_cfg = PruneConfig(**cfg.prune)
    provenance = {
        "seed": seed,
        "dataset": dataset.name,
        "data_span": dataset.time_span(),
        "mode": cfg.mode,
        "tool_version": __version__,
    }
    genotype, audit = hierarchical_prune(result.net, val_batches, prune_cfg, provenance=provenance)
    geno_path = os.path.join(cfg.out_dir, "genotype.json")
    genotype.save(geno_path)
    write_audit_log(os.path.join(cfg.out_dir, "pruning_audit.jsonl"), audit)
    log_event("search_done", genotype=geno_path, digest=genotype.digest())
    print(geno_path)
    return EXIT_OK


def cmd_train(args):
    cfg, errors = load_run_config(args.config)
    if errors:
        for e in errors:
            print(e, file=sys.stderr)
        return EXIT_CONFIG
    genotype = Genotype.load(args.genotype).validate()
    os.makedirs(cfg.out_dir, exist_ok=True)
    dataset, _entry = _load_dataset(cfg)
    train_cfg = TrainConfig(ratios=tuple(cfg.split_ratios), **cfg.train)
    runs_csv = os.path.join(cfg.out_dir, "runs.csv")
    new_file = not os.path.exists(runs_csv)
    rows = []
    for H in cfg.horizons:
        for seed in cfg.seeds:
            log_event("train_start", H=H, seed=seed)
            report, net, ds, _te = train_genotype(
                genotype,
                dataset,
                train_cfg,
                seed=seed,
                H=H,
                log=lambda rec: log_event("train_epoch", H=H, seed=seed, **rec),
            )
            rpath = os.path.join(cfg.out_dir, f"train_H{H}_seed{seed}.json")
            with open(rpath, "w") as fh:
                json.dump(report.to_json(), fh, indent=2)
            wpath = os.path.join(cfg.out_dir, f"weights_H{H}_seed{seed}.npz")
            np.savez(wpath, **{n: p.data for n, p in net.weight_parameters()})
            rows.append((dataset.name, H, seed, report.test_mse, report.test_mae, report.n_params, report.wallclock))
            log_event("train_done", H=H, seed=seed, mse=report.test_mse, mae=report.test_mae)
    with open(runs_csv, "a", newline="") as fh:
        w = csv.writer(fh)
        if new_file:
            w.writerow(["dataset", "horizon", "seed", "mse", "mae", "params", "wallclock"])
        for row in rows:
            w.writerow(row)
    summary_path = os.path.join(cfg.out_dir, "summary.csv")
    with open(summary_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["horizon", "mse_mean", "mse_std", "mae_mean", "mae_std", "n_seeds"])
        for H in cfg.horizons:
            mses = [r[3] for r in rows if r[1] == H]
            maes = [r[4] for r in rows if r[1] == H]
            w.writerow(
                [H, float(np.mean(mses)), float(np.std(mses)), float(np.mean(maes)), float(np.std(maes)), len(mses)]
            )
    print(summary_path)
    return EXIT_OK


def cmd_eval(args):
    cfg, errors = load_run_config(args.config)
    if errors:
        for e in errors:
            print(e, file=sys.stderr)
        return EXIT_CONFIG
    genotype = Genotype.load(args.genotype).validate()
    dataset, _entry = _load_dataset(cfg)
    H = args.horizon or min(cfg.horizons)
    net_cfg = config_for_genotype(genotype, L=cfg.L, H=H)
    net = build_discrete(genotype, net_cfg, seed=cfg.seeds[0])
    with np.load(args.weights) as zf:
        weights = {k: zf[k] for k in zf.files}
    for name, p in net.weight_parameters():
        if name not in weights:
            raise ContractError(f"weights file lacks parameter {name}")
        p.data = weights[name].astype(p.data.dtype)
    train_cfg = TrainConfig(ratios=tuple(cfg.split_ratios), **cfg.train)
    tr, va, te = chrono_split(dataset, "final", net_cfg.L, net_cfg.H, train_cfg.ratios)
    ds, _ = standardize(dataset, tr)
    batches = list(
        iter_batches(ds, te, net_cfg.L, net_cfg.H, train_cfg.batch_size, train_cfg.stride)
    )
    mse, mae = evaluate(net, batches)
    baselines = naive_baselines(batches)
    out = {"mse": mse, "mae": mae, "baselines": baselines, "H": H}
    print(json.dumps(out, indent=2))
    return EXIT_OK


def cmd_profile(args):
    genotype = Genotype.load(args.genotype).validate()
    net_cfg = config_for_genotype(genotype, L=args.lookback, H=args.horizon)
    net = build_discrete(genotype, net_cfg, seed=args.seed)
    report = profile(net, args.batch_size, args.lookback, args.horizon, repetitions=args.repetitions)
    if args.json:
        print(json.dumps(report.to_json(), indent=2))
    else:
        print(f"parameters:        {report.parameter_count}")
        print(f"forward (median):  {report.forward_seconds * 1e3:.2f} ms")
        print(f"fwd+bwd (median):  {report.forward_backward_seconds * 1e3:.2f} ms")
        print(f"peak live bytes:   {report.peak_live_bytes}")
        print(f"geometry:          B={report.batch_size} L={report.lookback} H={report.horizon} N={report.n_targets}")
    return EXIT_OK


def _genotype_dot(genotype: Genotype):
    lines = ["digraph genotype {", "  rankdir=BT;"]
    for group_name, cells in (
        ("flat", genotype.flat),
        ("enc", genotype.seq_encoder),
        ("dec", genotype.seq_decoder),
    ):
        if cells is None:
            continue
        for ci, cell in enumerate(cells):
            pre = f"{group_name}{ci}"
            lines.append(f"  subgraph cluster_{pre} {{")
            lines.append(f'    label="{group_name} cell {ci}";')
            nodes = {0, 1} | set(cell.nodes.keys())
            for n in sorted(nodes):
                shape = "box" if n in (0, 1) else "ellipse"
                lines.append(f'    {pre}_n{n} [label="{n}", shape={shape}];')
            for dest, pairs in sorted(cell.nodes.items()):
                for src, kind in pairs:
                    lines.append(f'    {pre}_n{src} -> {pre}_n{dest} [label="{kind}"];')
            lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_show(args):
    genotype = Genotype.load(args.genotype).validate()
    for group_name, cells in (
        ("Flat", genotype.flat),
        ("Seq encoder", genotype.seq_encoder),
        ("Seq decoder", genotype.seq_decoder),
    ):
        if cells is None:
            print(f"{group_name}: (none)")
            continue
        print(f"{group_name}:")
        for ci, cell in enumerate(cells):
            print(f"  cell {ci}:")
            for dest, pairs in sorted(cell.nodes.items()):
                desc = ", ".join(f"{kind}({src}->{dest})" for src, kind in pairs)
                print(f"    node {dest}: {desc}")
    print(f"decoder: {genotype.decoder_kind}")
    print(f"head: {genotype.head_kind}")
    print(f"macro weights (seq, flat): {genotype.macro_weights}")
    if genotype.provenance:
        print(f"provenance: {json.dumps(genotype.provenance, sort_keys=True)}")
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(_genotype_dot(genotype))
        print(f"wrote {args.dot}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="tsnas", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("search", help="run the bilevel search and prune to a genotype")
    sp.add_argument("--config", required=True)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_search)

    tp = sub.add_parser("train", help="retrain a genotype per horizon and seed")
    tp.add_argument("--genotype", required=True)
    tp.add_argument("--config", required=True)
    tp.set_defaults(func=cmd_train)

    ep = sub.add_parser("eval", help="evaluate trained weights on the test split")
    ep.add_argument("--genotype", required=True)
    ep.add_argument("--weights", required=True)
    ep.add_argument("--config", required=True)
    ep.add_argument("--horizon", type=int, default=None)
    ep.set_defaults(func=cmd_eval)

    pp = sub.add_parser("profile", help="parameter/latency/memory profile of a genotype")
    pp.add_argument("--genotype", required=True)
    pp.add_argument("--batch-size", type=int, default=32)
    pp.add_argument("--lookback", type=int, default=96)
    pp.add_argument("--horizon", type=int, default=96)
    pp.add_argument("--repetitions", type=int, default=5)
    pp.add_argument("--seed", type=int, default=0)
    pp.add_argument("--json", action="store_true")
    pp.set_defaults(func=cmd_profile)

    shp = sub.add_parser("show", help="print a genotype in human-readable form")
    shp.add_argument("--genotype", required=True)
    shp.add_argument("--dot", default=None)
    shp.set_defaults(func=cmd_show)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GenotypeError, DataError) as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except (NumericFault, SearchError, ContractError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
