import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import tiny_config
from tsnas.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from tsnas.data import TimeSeriesDataset, make_synthetic, save_csv
from tsnas.genotype import Genotype


@pytest.fixture
def workspace(tmp_path):
    ds = make_synthetic("sine", T=160, N=2, noise=0.05, seed=1)
    csv_path = tmp_path / "series.csv"
    save_csv(csv_path, ds)
    cfg = {
        "dataset": str(csv_path),
        "mode": "FlatOnly",
        "L": 8,
        "horizons": [4],
        "seeds": [0],
        "out_dir": str(tmp_path / "out"),
        "network": {
            "d_model": 4,
            "nbeats_width": 8,
            "n_intermediate": 1,
            "n_flat_cells": 1,
            "ma_kernel": 3,
            "dropout": 0.0,
        },
        "search": {"epochs": 1, "batch_size": 8, "stride": 2, "max_steps_per_epoch": 2},
        "train": {"max_epochs": 2, "batch_size": 8, "stride": 2},
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(cfg))
    return tmp_path, cfg, cfg_path


def test_missing_dataset_key_named(tmp_path, capsys):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"horizons": [4]}))
    rc = main(["search", "--config", str(cfg_path)])
    err = capsys.readouterr().err
    assert rc == EXIT_CONFIG
    assert "'dataset'" in err


def test_config_errors_listed_exhaustively(tmp_path, capsys):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"dataset": "/nope.csv", "mode": "Bogus", "horizons": [], "seeds": []}))
    rc = main(["search", "--config", str(cfg_path)])
    err = capsys.readouterr().err
    assert rc == EXIT_CONFIG
    assert "dataset path" in err and "mode" in err and "horizons" in err and "seeds" in err
    out_dirs = [p for p in tmp_path.iterdir() if p.is_dir()]
    assert not out_dirs  # no partial output on validation failure


def test_search_produces_genotype_and_audit(workspace, capsys):
    tmp_path, cfg, cfg_path = workspace
    rc = main(["search", "--config", str(cfg_path)])
    captured = capsys.readouterr()
    assert rc == EXIT_OK
    geno_path = captured.out.strip().splitlines()[-1]
    assert os.path.exists(geno_path)
    geno = Genotype.load(geno_path).validate()
    assert geno.provenance["seed"] == 0
    audit_path = os.path.join(cfg["out_dir"], "pruning_audit.jsonl")
    records = [json.loads(line) for line in open(audit_path)]
    assert records and all("choice_point" in r for r in records)
    assert os.path.exists(os.path.join(cfg["out_dir"], "supernet_checkpoint.npz"))
    # stderr carries line-delimited JSON progress
    for line in captured.err.strip().splitlines():
        json.loads(line)


def test_search_seed_determinism_hash_equal(workspace, capsys):
    import hashlib

    tmp_path, cfg, cfg_path = workspace
    assert main(["search", "--config", str(cfg_path), "--seed", "7"]) == EXIT_OK
    h1 = hashlib.sha256(open(os.path.join(cfg["out_dir"], "genotype.json"), "rb").read()).hexdigest()
    assert main(["search", "--config", str(cfg_path), "--seed", "7"]) == EXIT_OK
    h2 = hashlib.sha256(open(os.path.join(cfg["out_dir"], "genotype.json"), "rb").read()).hexdigest()
    capsys.readouterr()
    assert h1 == h2


def test_env_seed_override(workspace, capsys, monkeypatch):
    tmp_path, cfg, cfg_path = workspace
    monkeypatch.setenv("DARTS_TS_SEED", "13")
    assert main(["search", "--config", str(cfg_path)]) == EXIT_OK
    capsys.readouterr()
    geno = Genotype.load(os.path.join(cfg["out_dir"], "genotype.json"))
    assert geno.provenance["seed"] == 13


def test_train_eval_profile_show_pipeline(workspace, capsys, tmp_path):
    _, cfg, cfg_path = workspace
    assert main(["search", "--config", str(cfg_path)]) == EXIT_OK
    capsys.readouterr()
    geno_path = os.path.join(cfg["out_dir"], "genotype.json")

    assert main(["train", "--genotype", geno_path, "--config", str(cfg_path)]) == EXIT_OK
    capsys.readouterr()
    runs = open(os.path.join(cfg["out_dir"], "runs.csv")).read().splitlines()
    assert runs[0].split(",") == ["dataset", "horizon", "seed", "mse", "mae", "params", "wallclock"]
    assert len(runs) == 2  # one (H, seed) pair
    summary = open(os.path.join(cfg["out_dir"], "summary.csv")).read().splitlines()
    assert len(summary) == 2
    report = json.load(open(os.path.join(cfg["out_dir"], "train_H4_seed0.json")))
    assert np.isfinite(report["test_mse"])

    weights = os.path.join(cfg["out_dir"], "weights_H4_seed0.npz")
    assert main(["eval", "--genotype", geno_path, "--weights", weights, "--config", str(cfg_path)]) == EXIT_OK
    out = capsys.readouterr().out
    payload = json.loads(out)
    assert abs(payload["mse"] - report["test_mse"]) < 1e-6
    assert "repeat_last" in payload["baselines"]

    assert main(["profile", "--genotype", geno_path, "--batch-size", "4",
                 "--lookback", "8", "--horizon", "4", "--repetitions", "3", "--json"]) == EXIT_OK
    prof = json.loads(capsys.readouterr().out)
    assert prof["parameter_count"] > 0 and prof["batch_size"] == 4

    dot_path = str(tmp_path / "g.dot")
    assert main(["show", "--genotype", geno_path, "--dot", dot_path]) == EXIT_OK
    out = capsys.readouterr().out
    assert "decoder:" in out and "head:" in out and "macro weights" in out
    dot = open(dot_path).read()
    assert dot.startswith("digraph")
    _assert_dot_acyclic(dot)


def _assert_dot_acyclic(dot):
    import re

    edges = re.findall(r"(\w+) -> (\w+)", dot)
    graph = {}
    for a, b in edges:
        graph.setdefault(a, []).append(b)
    seen, stack = set(), set()

    def visit(n):
        if n in stack:
            raise AssertionError("cycle in DOT output")
        if n in seen:
            return
        stack.add(n)
        seen.add(n)
        for m in graph.get(n, []):
            visit(m)
        stack.discard(n)

    for n in list(graph):
        visit(n)


def test_show_all_skip_dump_mentions_only_skip(workspace, capsys, tmp_path):
    from tsnas.genotype import CellGenotype

    cell = CellGenotype(nodes={2: [(0, "Skip"), (1, "Skip")], 3: [(0, "Skip"), (2, "Skip")],
                               4: [(2, "Skip"), (3, "Skip")]})
    cfg_net = tiny_config(mode="FlatOnly")
    geno = Genotype(
        search_space=cfg_net.to_json(),
        flat=[cell, cell],
        seq_encoder=None,
        seq_decoder=None,
        decoder_kind=None,
        head_kind="MSE",
        macro_weights=[0.0, 1.0],
        provenance={},
    )
    path = tmp_path / "skip.json"
    geno.save(path)
    assert main(["show", "--genotype", str(path)]) == EXIT_OK
    out = capsys.readouterr().out
    from tsnas.flat_ops import FlatOpKind
    from tsnas.seq_ops import SeqOpKind

    op_names = {k.value for k in FlatOpKind} | {k.value for k in SeqOpKind}
    mentioned = {name for name in op_names if name in out}
    assert mentioned == {"Skip"}
    # dump lists exactly 2 in-edges per non-input node
    for line in out.splitlines():
        if line.strip().startswith("node"):
            assert line.count("->") == 2


def test_corrupt_genotype_is_config_error(workspace, capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"flat": None}))
    _, cfg, cfg_path = workspace
    rc = main(["train", "--genotype", str(bad), "--config", str(cfg_path)])
    err = capsys.readouterr().err
    assert rc == EXIT_CONFIG
    assert "/search_space" in err or "missing required field" in err


def test_nonexistent_genotype_distinct_exit_code(capsys):
    rc = main(["profile", "--genotype", "/does/not/exist.json"])
    capsys.readouterr()
    assert rc == EXIT_RUNTIME
    assert rc not in (EXIT_OK, EXIT_CONFIG)


def test_module_entry_point_runs():
    env = dict(os.environ)
    env["PYTHONPATH"] = os.pathsep.join([os.path.abspath("src")] + env.get("PYTHONPATH", "").split(os.pathsep))
    proc = subprocess.run(
        [sys.executable, "-m", "tsnas", "--version"], capture_output=True, text=True, env=env
    )
    assert proc.returncode == 0
