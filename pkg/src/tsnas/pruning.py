"""Hierarchical perturbation-based discretization.

Choices commit from the lowest granularity upward: first every edge's
operation (flat cells, then encoder cells, then decoder cells), then the
decoder kind, then the head kind. Scoring forces one candidate exactly
one-hot, measures validation loss with weights frozen and modules in eval
mode, and restores the supernet untouched. Once operations are committed,
each node keeps the two in-edges whose zero-masking hurts validation loss
the most. Macro weights are frozen as their learned softmax values, never
discretized.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from .genotype import Genotype
from .network import DECODER_KINDS, ForecastNetwork
from .tensor import ContractError, NumericFault, no_grad


@dataclass
class PruneConfig:
    n_batches: int | None = None  # None: full validation pass per score
    fine_tune_steps: int = 0  # weight updates between commits (off by default)

    def __post_init__(self):
        if self.fine_tune_steps:
            raise ContractError("fine-tuning between pruning commits is not implemented")


@dataclass
class AuditRecord:
    stage: str
    choice_point: str
    candidate: str
    score: float
    committed: bool

    def to_json(self):
        return {
            "stage": self.stage,
            "choice_point": self.choice_point,
            "candidate": self.candidate,
            "score": self.score if math.isfinite(self.score) else "inf",
            "committed": self.committed,
        }


def write_audit_log(path, records):
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()))
            fh.write("\n")


def _key_str(key):
    return ":".join(str(p) for p in key)


def validation_loss(net: ForecastNetwork, val_batches, n_batches=None):
    """Mean loss over validation batches, eval mode, no recording."""
    net.eval()
    total, count = 0.0, 0
    for i, batch in enumerate(val_batches):
        with no_grad():
            loss, _ = net.loss(
                batch.past_targets,
                batch.future_targets,
                past_features=batch.past_features,
                future_features=batch.future_features,
            )
        b = batch.batch_size
        total += loss.item() * b
        count += b
        if n_batches is not None and (i + 1) >= n_batches:
            break
    if count == 0:
        raise ContractError("no validation batches to score on")
    return total / count


def perturb_score(net: ForecastNetwork, choice_key, candidate_idx, val_batches, n_batches=None):
    """Validation loss with one candidate forced exactly one-hot.

    Side-effect free: the force is transient and non-finite losses mark the
    candidate infeasible instead of propagating.
    """
    with net.arch.force(choice_key, candidate_idx):
        try:
            return validation_loss(net, val_batches, n_batches)
        except NumericFault:
            return float("inf")


def _score_and_commit(net, stage, choice_key, candidate_names, val_batches, audit, n_batches):
    scores = []
    for idx, cname in enumerate(candidate_names):
        s = perturb_score(net, choice_key, idx, val_batches, n_batches)
        scores.append(s)
    best = min(range(len(scores)), key=lambda i: (scores[i], i))  # tie: lower index
    for idx, cname in enumerate(candidate_names):
        audit.append(
            AuditRecord(
                stage=stage,
                choice_point=_key_str(choice_key),
                candidate=str(cname),
                score=scores[idx],
                committed=(idx == best),
            )
        )
    net.arch.freeze(choice_key, best)
    return best


def _group_cells(net):
    """(group name, cells, spec) triples in network order: flat, enc, dec."""
    cfg = net.config
    out = []
    if cfg.has_flat:
        out.append(("flat", list(net.flat_cells), cfg.flat_spec()))
    if cfg.has_seq:
        out.append(("seq_encoder", list(net.enc_cells), cfg.seq_spec()))
        out.append(("seq_decoder", list(net.dec_cells), cfg.seq_spec()))
    return out


def select_operations(net: ForecastNetwork, val_batches, audit, n_batches=None):
    """Granularity (1): every edge op; (2) decoder choice; (3) head choice."""
    cfg = net.config
    for group, cells, spec in _group_cells(net):
        for k, _cell in enumerate(cells):
            for dest, src in sorted(spec.edges()):
                key = ("op", group, k, dest, src)
                _score_and_commit(
                    net,
                    "op",
                    key,
                    [getattr(c, "value", c) for c in spec.candidates(dest, src)],
                    val_batches,
                    audit,
                    n_batches,
                )
    if cfg.has_seq:
        _score_and_commit(net, "decoder", ("decoder",), DECODER_KINDS, val_batches, audit, n_batches)
    _score_and_commit(
        net, "head", ("head",), [h.value for h in net.head_kinds], val_batches, audit, n_batches
    )


def prune_edges(net: ForecastNetwork, val_batches, audit, n_batches=None, keep=2):
    """Keep per node the edges whose removal raises validation loss the most."""
    for group, cells, spec in _group_cells(net):
        for k, _cell in enumerate(cells):
            for dest in range(spec.n_in, spec.n_nodes):
                in_edges = spec.in_edges(dest)
                ekeys = [(group, k, d, s) for d, s in in_edges]
                if len(ekeys) <= keep:
                    continue
                scores = []
                for ekey in ekeys:
                    with net.arch.mask_edge(ekey):
                        try:
                            s = validation_loss(net, val_batches, n_batches)
                        except NumericFault:
                            s = float("inf")
                    scores.append(s)
                order = sorted(range(len(ekeys)), key=lambda i: (-scores[i], i))
                kept = set(order[:keep])
                for i, ekey in enumerate(ekeys):
                    audit.append(
                        AuditRecord(
                            stage="edge",
                            choice_point=_key_str(ekey),
                            candidate="remove",
                            score=scores[i],
                            committed=(i not in kept),
                        )
                    )
                    if i not in kept:
                        net.arch.remove_edge(ekey)


def hierarchical_prune(net: ForecastNetwork, val_batches, config: PruneConfig = None, provenance=None):
    """Full discretization; returns (genotype, audit records)."""
    config = config or PruneConfig()
    val_batches = list(val_batches)
    audit = []
    before = {name: p.data.copy() for name, p in net.weight_parameters()}
    select_operations(net, val_batches, audit, config.n_batches)
    prune_edges(net, val_batches, audit, config.n_batches)
    for name, p in net.weight_parameters():
        if not np.array_equal(before[name], p.data):
            raise ContractError(f"pruning mutated weight tensor {name}")
    genotype = net.extract_genotype(provenance=provenance)
    genotype.validate()
    return genotype, audit


# ---------------------------------------------------------------------------
# brute-force oracle over tiny discrete spaces


@dataclass
class OracleEntry:
    loss: float
    assignment: dict  # choice key -> candidate index
    removed: tuple  # removed edge keys

    def signature(self):
        return _signature(self.assignment, self.removed)


def _signature(assignment, removed):
    items = tuple(sorted((_key_str(k), v) for k, v in assignment.items()))
    return (items, tuple(sorted(_key_str(e) for e in removed)))


def count_discrete_architectures(net: ForecastNetwork, keep=2):
    total = 1
    for group, cells, spec in _group_cells(net):
        for k, _cell in enumerate(cells):
            for dest, src in spec.edges():
                total *= len(spec.candidates(dest, src))
            for dest in range(spec.n_in, spec.n_nodes):
                m = len(spec.in_edges(dest))
                if m > keep:
                    total *= math.comb(m, keep)
    if net.config.has_seq:
        total *= len(DECODER_KINDS)
    total *= len(net.head_kinds)
    return total


def brute_force_oracle(net: ForecastNetwork, val_batches, limit=64, n_batches=None, keep=2):
    """Enumerate every legal discrete architecture and rank by validation loss."""
    val_batches = list(val_batches)
    n_archs = count_discrete_architectures(net, keep)
    if n_archs > limit:
        raise ContractError(f"{n_archs} discrete architectures exceed the oracle limit {limit}")

    op_keys, op_sizes = [], []
    edge_groups = []  # (node ekeys, how many to drop)
    for group, cells, spec in _group_cells(net):
        for k, _cell in enumerate(cells):
            for dest, src in sorted(spec.edges()):
                op_keys.append(("op", group, k, dest, src))
                op_sizes.append(len(spec.candidates(dest, src)))
            for dest in range(spec.n_in, spec.n_nodes):
                ekeys = [(group, k, d, s) for d, s in spec.in_edges(dest)]
                if len(ekeys) > keep:
                    edge_groups.append(ekeys)
    choice_keys, choice_sizes = list(op_keys), list(op_sizes)
    if net.config.has_seq:
        choice_keys.append(("decoder",))
        choice_sizes.append(len(DECODER_KINDS))
    choice_keys.append(("head",))
    choice_sizes.append(len(net.head_kinds))

    entries = []
    edge_options = [
        [tuple(set(g) - set(kept)) for kept in itertools.combinations(g, keep)]
        for g in edge_groups
    ]
    for combo in itertools.product(*[range(n) for n in choice_sizes]):
        assignment = dict(zip(choice_keys, combo))
        for removal in itertools.product(*edge_options) if edge_options else [()]:
            removed = tuple(e for grp in removal for e in grp)
            with net.arch.force_many(assignment), net.arch.mask_edges(removed):
                try:
                    loss = validation_loss(net, val_batches, n_batches)
                except NumericFault:
                    loss = float("inf")
            entries.append(OracleEntry(loss=loss, assignment=assignment, removed=removed))
    entries.sort(key=lambda e: e.loss)
    return entries


def oracle_rank_of(entries, net: ForecastNetwork):
    """Rank (0-based) of the net's committed discretization in the oracle list."""
    assignment = dict(net.arch.frozen)
    removed = tuple(net.arch.removed_edges)
    sig = _signature(assignment, removed)
    for rank, e in enumerate(entries):
        if e.signature() == sig:
            return rank
    raise ContractError("committed architecture not found in oracle enumeration")
