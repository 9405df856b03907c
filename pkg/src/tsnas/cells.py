"""DAG cells with softmax-mixed edges and the architecture-parameter store.

A cell is a small fully connected DAG: input nodes, intermediate nodes and
one output node, every non-input node summing its in-edge outputs. Each
edge holds all candidate operations; ``ArchParams`` owns the per-edge
logits plus the decoder/head/macro logits, and tracks committed (frozen)
and transiently forced choices so discretization can reuse the exact same
forward path.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .flat_ops import FLAT_OPS, FlatOpKind, NBeatsBackbone, make_flat_op
from .nn import Module, ModuleDict, ModuleList
from .rng import Rng
from .seq_ops import SEQ_OPS, EncoderStateBundle, SeqOpKind, make_seq_op
from .tensor import ContractError, ShapeError, Tensor


@dataclass(frozen=True)
class CellSpec:
    """Topology and candidate set of one cell family."""

    family: str  # "seq" | "flat"
    n_in: int = 2
    n_intermediate: int = 2
    ops: tuple = ()
    # optional per-edge candidate restriction, e.g. for micro benchmarks
    edge_candidates: tuple = ()  # ((dest, src, (kinds...)), ...)

    def __post_init__(self):
        if self.n_intermediate < 1:
            raise ContractError("CellSpec: need at least one intermediate node")
        if self.n_in < 2:
            raise ContractError(
                "CellSpec: cells materialize >= 2 input nodes (single inputs are replicated)"
            )
        if not self.ops:
            object.__setattr__(
                self, "ops", SEQ_OPS if self.family == "seq" else FLAT_OPS
            )

    @property
    def n_nodes(self):
        return self.n_in + self.n_intermediate + 1

    @property
    def output_node(self):
        return self.n_nodes - 1

    def edges(self):
        return [
            (dest, src)
            for dest in range(self.n_in, self.n_nodes)
            for src in range(dest)
        ]

    def in_edges(self, dest):
        return [(dest, src) for src in range(dest)]

    def candidates(self, dest, src):
        for d, s, kinds in self.edge_candidates:
            if (d, s) == (dest, src):
                return tuple(kinds)
        return tuple(self.ops)


def edge_name(dest, src):
    return f"{dest}-{src}"


class ArchParams:
    """All continuous architecture logits plus freeze/force bookkeeping."""

    def __init__(self, dtype=np.float32):
        self.dtype = dtype
        self._logits = {}  # key -> Tensor
        self._order = []
        self.frozen = {}  # key -> candidate index
        self._forced = {}  # transient one-hot overrides (perturbation scoring)
        self.removed_edges = set()  # committed ("group", cell, dest, src)
        self._masked_edges = set()  # transient edge zero-masks

    def add(self, key, n: int):
        if key in self._logits:
            raise ContractError(f"duplicate arch param {key}")
        t = Tensor(np.zeros(n, dtype=self.dtype), requires_grad=True)
        self._logits[key] = t
        self._order.append(key)
        return t

    def keys(self):
        return list(self._order)

    def logits(self, key):
        return self._logits[key]

    def n_candidates(self, key):
        return self._logits[key].shape[0]

    def named_parameters(self):
        return [(f"arch.{'.'.join(str(p) for p in key)}", self._logits[key]) for key in self._order]

    def parameters(self):
        return [self._logits[k] for k in self._order]

    def weights(self, key):
        """Mixture weights: exact one-hot ndarray when forced/frozen, else softmax Tensor."""
        idx = self._forced.get(key)
        if idx is None:
            idx = self.frozen.get(key)
        if idx is not None:
            w = np.zeros(self._logits[key].shape[0], dtype=self.dtype)
            w[idx] = 1.0
            return w
        return T.softmax(self._logits[key], axis=0)

    @contextmanager
    def force(self, key, idx):
        if key in self._forced:
            raise ContractError(f"{key} already forced")
        self._forced[key] = int(idx)
        try:
            yield
        finally:
            del self._forced[key]

    @contextmanager
    def force_many(self, mapping):
        for key, idx in mapping.items():
            if key in self._forced:
                raise ContractError(f"{key} already forced")
            self._forced[key] = int(idx)
        try:
            yield
        finally:
            for key in mapping:
                del self._forced[key]

    def freeze(self, key, idx):
        if key in self.frozen:
            raise ContractError(f"{key} already frozen to {self.frozen[key]}")
        self.frozen[key] = int(idx)

    # edge-level pruning -----------------------------------------------------
    def edge_active(self, ekey):
        return ekey not in self.removed_edges and ekey not in self._masked_edges

    @contextmanager
    def mask_edge(self, ekey):
        with self.mask_edges((ekey,)):
            yield

    @contextmanager
    def mask_edges(self, ekeys):
        for e in ekeys:
            if e in self._masked_edges:
                raise ContractError(f"edge {e} already masked")
            self._masked_edges.add(e)
        try:
            yield
        finally:
            for e in ekeys:
                self._masked_edges.discard(e)

    def remove_edge(self, ekey):
        self.removed_edges.add(ekey)

    def entropy(self):
        """Mean softmax entropy per logit group kind, for progress logging."""
        out = {}
        counts = {}
        for key in self._order:
            t = self._logits[key]
            x = t.data.astype(np.float64)
            e = np.exp(x - x.max())
            p = e / e.sum()
            h = float(-(p * np.log(p + 1e-12)).sum())
            kind = key[0]
            out[kind] = out.get(kind, 0.0) + h
            counts[kind] = counts.get(kind, 0) + 1
        return {k: out[k] / counts[k] for k in out}

    def state_arrays(self):
        return {f"arch.{'.'.join(str(p) for p in key)}": self._logits[key].data for key in self._order}


def _mix(weights, values):
    """Softmax-weighted sum of candidate tensors (skips exact-zero weights)."""
    if isinstance(weights, np.ndarray):
        total = None
        for i, v in enumerate(values):
            if weights[i] == 0.0 or v is None:
                continue
            term = v if weights[i] == 1.0 else T.mul(v, float(weights[i]))
            total = term if total is None else T.add(total, term)
        return total
    total = None
    for i, v in enumerate(values):
        if v is None:
            continue
        term = T.mul(v, weights[i])
        total = term if total is None else T.add(total, term)
    return total


class MixedSeqEdge(Module):
    """One Seq edge holding every candidate op; output is the weighted mix."""

    def __init__(
        self,
        group,
        cell_index,
        dest,
        src,
        kinds,
        role,
        d_model,
        L_in,
        L_out,
        rng: Rng,
        dropout=0.1,
        dtype=np.float32,
        n_in=2,
        bundle_needs=("full", "last", "gate"),
    ):
        super().__init__()
        self.key = (group, cell_index, dest, src)
        self.kinds = tuple(SeqOpKind(k) for k in kinds)
        self.role = role
        self.d_model = d_model
        self.L_in = L_in
        self.np_dtype = dtype
        self.bundle_needs = frozenset(bundle_needs)
        ops = ModuleDict()
        for k in self.kinds:
            needs_stitch = "gate" in self.bundle_needs
            op = make_seq_op(
                k,
                role,
                d_model,
                L_in,
                L_out,
                position=(cell_index, src, n_in),
                rng=rng.child(k.value),
                dropout=dropout,
                dtype=dtype,
            )
            if role == "encoder" and not needs_stitch and hasattr(op, "stitch"):
                # drop the unused gate-synthesis layer in discrete builds
                op._params.pop("stitch", None)
                op._children.pop("stitch", None)
                object.__setattr__(op, "stitch", None)
            ops[k.value] = op
        self.ops = ops

    def _bundle(self, op, out):
        needs = self.bundle_needs
        if "gate" in needs:
            return op.bundle(out)
        # gate not needed in this build: never touch the stitch layer
        if getattr(op, "_last_state", None) is not None:
            h, _c = op._last_state
            op._last_state = None
            last = h
        else:
            last = out[:, -1, :] if "last" in needs else None
        return EncoderStateBundle(out, last, None)

    def _zero_bundle(self, x):
        """Stands in when the paired encoder edge was pruned away: the decoder
        op still runs, initialized from information-free zero states."""
        B = x.shape[0]
        d = self.d_model
        return EncoderStateBundle(
            full_output=T.zeros((B, self.L_in, d), dtype=self.np_dtype),
            last_step=T.zeros((B, d), dtype=self.np_dtype),
            cell_gate=T.zeros((B, d), dtype=self.np_dtype),
        )

    def forward(self, x, arch: ArchParams, paired=None):
        if self.role == "decoder" and paired is None:
            paired = self._zero_bundle(x)
        w = arch.weights(("op",) + self.key)
        if w.shape[0] != len(self.kinds):
            raise ShapeError(
                f"edge {self.key}: {w.shape[0]} mixture weights for {len(self.kinds)} candidates"
            )
        outs, bundles = [], []
        onehot = isinstance(w, np.ndarray)
        for i, k in enumerate(self.kinds):
            if onehot and w[i] == 0.0:
                outs.append(None)
                bundles.append(None)
                continue
            op = self.ops[k.value]
            out = op(x, paired)
            outs.append(out)
            if self.role == "encoder":
                bundles.append(self._bundle(op, out))
        mixed = _mix(w, outs)
        if self.role != "encoder":
            return mixed, None
        full = _mix(w, [b.full_output if b else None for b in bundles])
        last = (
            _mix(w, [b.last_step if b else None for b in bundles])
            if "last" in self.bundle_needs
            else None
        )
        gate = (
            _mix(w, [b.cell_gate if b else None for b in bundles])
            if "gate" in self.bundle_needs
            else None
        )
        return mixed, EncoderStateBundle(full, last, gate)


class MixedFlatEdge(Module):
    """One Flat edge; N-BEATS candidates share a single backbone."""

    def __init__(self, cell_index, dest, src, kinds, L, H, width, rng: Rng, is_final=False, dtype=np.float32):
        super().__init__()
        self.key = ("flat", cell_index, dest, src)
        self.kinds = tuple(FlatOpKind(k) for k in kinds)
        needs_backbone = any(
            k in (FlatOpKind.NBeatsGeneric, FlatOpKind.NBeatsTrend, FlatOpKind.NBeatsSeasonal)
            for k in self.kinds
        )
        self.backbone = (
            NBeatsBackbone(L, width, rng.child("backbone"), dtype=dtype) if needs_backbone else None
        )
        ops = ModuleDict()
        for k in self.kinds:
            ops[k.value] = make_flat_op(
                k, L, H, rng.child(k.value), backbone=self.backbone, is_final=is_final, dtype=dtype
            )
        self.ops = ops

    def forward(self, backcast, forecast, arch: ArchParams):
        w = arch.weights(("op",) + self.key)
        if w.shape[0] != len(self.kinds):
            raise ShapeError(
                f"edge {self.key}: {w.shape[0]} mixture weights for {len(self.kinds)} candidates"
            )
        bs, fs = [], []
        onehot = isinstance(w, np.ndarray)
        for i, k in enumerate(self.kinds):
            if onehot and w[i] == 0.0:
                bs.append(None)
                fs.append(None)
                continue
            b, f = self.ops[k.value](backcast, forecast)
            bs.append(b)
            fs.append(f)
        return _mix(w, bs), _mix(w, fs)


class SeqCell(Module):
    def __init__(
        self,
        spec: CellSpec,
        group,
        cell_index,
        role,
        d_model,
        L_in,
        L_out,
        rng: Rng,
        dropout=0.1,
        dtype=np.float32,
        keep_edges=None,
        bundle_needs_fn=None,
    ):
        super().__init__()
        self.spec = spec
        self.group = group
        self.cell_index = cell_index
        self.role = role
        edges = ModuleDict()
        for dest, src in spec.edges():
            if keep_edges is not None and (dest, src) not in keep_edges:
                continue
            needs = (
                bundle_needs_fn(dest, src)
                if bundle_needs_fn is not None
                else ("full", "last", "gate")
            )
            edges[edge_name(dest, src)] = MixedSeqEdge(
                group,
                cell_index,
                dest,
                src,
                spec.candidates(dest, src),
                role,
                d_model,
                L_in,
                L_out,
                rng.child(edge_name(dest, src)),
                dropout=dropout,
                dtype=dtype,
                n_in=spec.n_in,
                bundle_needs=needs,
            )
        self.edges = edges

    def forward(self, inputs, arch: ArchParams, paired_bundles=None):
        """inputs: one tensor per input node. Returns (output, bundles by edge)."""
        if len(inputs) != self.spec.n_in:
            raise ShapeError(
                f"cell expects {self.spec.n_in} inputs, got {len(inputs)}"
            )
        nodes = list(inputs)
        bundles = {}
        for dest in range(self.spec.n_in, self.spec.n_nodes):
            total = None
            built = 0
            for dest_, src in self.spec.in_edges(dest):
                name = edge_name(dest_, src)
                if name not in self.edges:
                    continue
                built += 1
                edge = self.edges[name]
                if not arch.edge_active(edge.key):
                    continue
                paired = paired_bundles.get((dest_, src)) if paired_bundles else None
                out, bundle = edge.forward(nodes[src], arch, paired=paired)
                if bundle is not None:
                    bundles[(dest_, src)] = bundle
                total = out if total is None else T.add(total, out)
            if total is None:
                if built == 0:  # dead node eliminated from a discrete build
                    nodes.append(None)
                    continue
                raise ContractError(f"node {dest} has no active in-edges")
            nodes.append(total)
        return nodes[-1], bundles


class FlatCell(Module):
    def __init__(
        self,
        spec: CellSpec,
        cell_index,
        L,
        H,
        width,
        rng: Rng,
        is_last_cell=False,
        dtype=np.float32,
        keep_edges=None,
    ):
        super().__init__()
        self.spec = spec
        self.cell_index = cell_index
        edges = ModuleDict()
        for dest, src in spec.edges():
            if keep_edges is not None and (dest, src) not in keep_edges:
                continue
            is_final = is_last_cell and dest == spec.output_node
            edges[edge_name(dest, src)] = MixedFlatEdge(
                cell_index,
                dest,
                src,
                spec.candidates(dest, src),
                L,
                H,
                width,
                rng.child(edge_name(dest, src)),
                is_final=is_final,
                dtype=dtype,
            )
        self.edges = edges

    def forward(self, inputs, arch: ArchParams):
        """inputs: list of (backcast, forecast) pairs, one per input node."""
        if len(inputs) != self.spec.n_in:
            raise ShapeError(f"cell expects {self.spec.n_in} inputs, got {len(inputs)}")
        nodes = list(inputs)
        for dest in range(self.spec.n_in, self.spec.n_nodes):
            tb, tf = None, None
            built = 0
            for dest_, src in self.spec.in_edges(dest):
                name = edge_name(dest_, src)
                if name not in self.edges:
                    continue
                built += 1
                edge = self.edges[name]
                if not arch.edge_active(edge.key):
                    continue
                b, f = edge.forward(nodes[src][0], nodes[src][1], arch)
                tb = b if tb is None else T.add(tb, b)
                tf = f if tf is None else T.add(tf, f)
            if tb is None:
                if built == 0:  # dead node eliminated from a discrete build
                    nodes.append(None)
                    continue
                raise ContractError(f"node {dest} has no active in-edges")
            nodes.append((tb, tf))
        return nodes[-1]


def pair_encoder_decoder_edges(n_enc_cells, n_dec_cells, spec: CellSpec, cell_index, dest, src):
    """Positional bijection: encoder (cell k, edge e) <-> decoder (cell k, edge e)."""
    if n_enc_cells != n_dec_cells:
        raise ContractError(
            f"encoder/decoder cell counts differ: {n_enc_cells} vs {n_dec_cells}"
        )
    if (dest, src) not in spec.edges():
        raise ContractError(f"edge ({dest},{src}) not in cell topology")
    return (cell_index, dest, src)
