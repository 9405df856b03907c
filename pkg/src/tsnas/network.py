"""Micro/macro assembly: Flat Net, Seq Net (encoder + dual decoders), heads.

The forecast is built in RevIN-normalized space. The Flat Net runs on
transposed streams; its forecast both feeds the Seq decoder (in the mixed
wiring) and joins the final weighted sum. During search every choice point
is a softmax mixture; a discrete build keeps only the genotype's ops and
edges and runs the exact same forward code with frozen one-hot weights.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import tensor as T
from .cells import ArchParams, CellSpec, FlatCell, SeqCell
from .flat_ops import FLAT_OPS, FlatOpKind
from .genotype import CellGenotype, Genotype, GenotypeError
from .heads import HeadKind, head_loss, make_head, point_forecast
from .nn import LayerNorm, Linear, Module, ModuleDict, ModuleList
from .norm import RevIN, moving_average_decompose
from .rng import Rng
from .seq_ops import SEQ_OPS, SeqOpKind
from .tensor import ContractError, Tensor

DECODER_KINDS = ("SeqDecoder", "LinearDecoder")
SEQ_HEAD_KINDS = (HeadKind.Quantile, HeadKind.MSE, HeadKind.MAE)
FLAT_HEAD_KINDS = (HeadKind.MSE, HeadKind.MAE)

BIG_VARIABLE_THRESHOLD = 100


class MacroMode(str, Enum):
    Mixed = "Mixed"
    FlatOnly = "FlatOnly"
    SeqOnly = "SeqOnly"
    Parallel = "Parallel"
    NoWeights = "NoWeights"


@dataclass
class NetworkConfig:
    L: int
    H: int
    n_targets: int
    mode: MacroMode = MacroMode.Mixed
    size_class: str | None = None  # "big" | "small"; derived from n_targets if None
    d_model: int | None = None
    nbeats_width: int | None = None
    n_seq_cells: int = 2
    n_flat_cells: int = 2
    n_intermediate: int = 2
    n_past_features: int = 0
    n_future_features: int = 0
    dropout: float = 0.1
    ma_kernel: int = 25
    revin_affine: bool = False
    seq_ops: tuple = SEQ_OPS
    flat_ops: tuple = FLAT_OPS
    seq_edge_candidates: tuple = ()
    flat_edge_candidates: tuple = ()
    heads: tuple | None = None  # override the mode-derived head-kind set
    dtype: str = "float32"

    def __post_init__(self):
        self.mode = MacroMode(self.mode)
        if self.L < 1 or self.H < 1:
            raise ContractError("NetworkConfig: L and H must be positive")
        if self.n_intermediate < 1:
            raise ContractError("NetworkConfig: need at least one intermediate node per cell")
        if self.size_class is None:
            self.size_class = "big" if self.n_targets > BIG_VARIABLE_THRESHOLD else "small"
        if self.size_class not in ("big", "small"):
            raise ContractError(f"NetworkConfig: bad size_class {self.size_class}")
        if self.d_model is None:
            self.d_model = 32 if self.size_class == "big" else 8
        if self.nbeats_width is None:
            self.nbeats_width = 256 if self.size_class == "big" else 96
        self.seq_ops = tuple(SeqOpKind(o) for o in self.seq_ops)
        self.flat_ops = tuple(FlatOpKind(o) for o in self.flat_ops)

    @property
    def np_dtype(self):
        return np.float32 if self.dtype == "float32" else np.float64

    @property
    def linear_decoder_norm(self):
        return self.size_class == "small"

    @property
    def has_flat(self):
        return self.mode != MacroMode.SeqOnly

    @property
    def has_seq(self):
        return self.mode != MacroMode.FlatOnly

    @property
    def head_kinds(self):
        if self.heads is not None:
            return tuple(HeadKind(h) for h in self.heads)
        return FLAT_HEAD_KINDS if self.mode == MacroMode.FlatOnly else SEQ_HEAD_KINDS

    @property
    def has_macro_logits(self):
        return self.mode in (MacroMode.Mixed, MacroMode.Parallel)

    def seq_spec(self):
        return CellSpec(
            family="seq",
            n_in=2,
            n_intermediate=self.n_intermediate,
            ops=self.seq_ops,
            edge_candidates=self.seq_edge_candidates,
        )

    def flat_spec(self):
        return CellSpec(
            family="flat",
            n_in=2,
            n_intermediate=self.n_intermediate,
            ops=self.flat_ops,
            edge_candidates=self.flat_edge_candidates,
        )

    def to_json(self):
        d = dict(self.__dict__)
        d["mode"] = self.mode.value
        d["seq_ops"] = [o.value for o in self.seq_ops]
        d["flat_ops"] = [o.value for o in self.flat_ops]
        if self.heads is not None:
            d["heads"] = [getattr(h, "value", h) for h in self.heads]
        d["seq_edge_candidates"] = [
            [dd, ss, [k.value if hasattr(k, "value") else k for k in kk]]
            for dd, ss, kk in self.seq_edge_candidates
        ]
        d["flat_edge_candidates"] = [
            [dd, ss, [k.value if hasattr(k, "value") else k for k in kk]]
            for dd, ss, kk in self.flat_edge_candidates
        ]
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        for key in ("seq_edge_candidates", "flat_edge_candidates"):
            d[key] = tuple((int(dd), int(ss), tuple(kk)) for dd, ss, kk in d.get(key, ()))
        for key in ("seq_ops", "flat_ops", "heads"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


class FrozenArch:
    """Arch provider for discrete models: every choice point is a singleton."""

    def weights(self, key):
        return np.ones(1, dtype=np.float64)

    def edge_active(self, ekey):
        return True

    def parameters(self):
        return []

    def named_parameters(self):
        return []


@dataclass
class ForecastOutput:
    point: T.Tensor  # [B, H, N], original scale
    point_norm: T.Tensor  # [B, H, N], normalized space
    per_head: dict  # head kind -> combined forecast in normalized space
    state: object  # RevInState


def _as_dtype_tensor(x, dtype):
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x, dtype=dtype))


class ForecastNetwork(Module):
    """Supernet (genotype=None) or discrete model built from a genotype."""

    def __init__(self, config: NetworkConfig, rng: Rng, genotype: Genotype | None = None):
        super().__init__()
        self.config = config
        cfg = config
        dt = cfg.np_dtype
        self.discrete = genotype is not None
        plan = _GenotypePlan(genotype, cfg) if genotype is not None else None
        self.plan = plan

        self.revin = RevIN(cfg.n_targets, affine=cfg.revin_affine, dtype=dt)

        # ---- Flat side -----------------------------------------------------
        if cfg.has_flat:
            spec = cfg.flat_spec()
            cells = ModuleList()
            for k in range(cfg.n_flat_cells):
                if plan is not None:
                    cell_spec = replace(spec, edge_candidates=plan.flat_candidates[k])
                    keep = plan.flat_keep[k]
                else:
                    cell_spec, keep = spec, None
                cells.append(
                    FlatCell(
                        cell_spec,
                        k,
                        cfg.L,
                        cfg.H,
                        cfg.nbeats_width,
                        rng.child(f"flat/{k}"),
                        is_last_cell=(k == cfg.n_flat_cells - 1),
                        dtype=dt,
                        keep_edges=keep,
                    )
                )
            self.flat_cells = cells

        # ---- Seq side ------------------------------------------------------
        if cfg.has_seq:
            enc_in = cfg.n_targets + cfg.n_past_features
            self.embed = Linear(enc_in, cfg.d_model, rng.child("embed"), dtype=dt)
            spec = cfg.seq_spec()
            enc = ModuleList()
            for k in range(cfg.n_seq_cells):
                if plan is not None:
                    cell_spec = replace(spec, edge_candidates=plan.enc_candidates[k])
                    keep = plan.enc_keep[k]
                    needs_fn = plan.bundle_needs_fn(k)
                else:
                    cell_spec, keep, needs_fn = spec, None, None
                enc.append(
                    SeqCell(
                        cell_spec,
                        "seq_encoder",
                        k,
                        "encoder",
                        cfg.d_model,
                        cfg.L,
                        cfg.L,
                        rng.child(f"enc/{k}"),
                        dropout=cfg.dropout,
                        dtype=dt,
                        keep_edges=keep,
                        bundle_needs_fn=needs_fn,
                    )
                )
            self.enc_cells = enc

            self.with_seq_decoder = plan.decoder_kind != "LinearDecoder" if plan else True
            self.with_linear_decoder = plan.decoder_kind != "SeqDecoder" if plan else True

            if self.with_seq_decoder:
                dec_width = 0
                if cfg.mode in (MacroMode.Mixed, MacroMode.NoWeights):
                    dec_width += cfg.n_targets  # flat forecast routed into the decoder
                if cfg.n_future_features > 0:
                    dec_width += cfg.n_future_features
                else:
                    self.posemb = Tensor(
                        rng.child("posemb").normal((cfg.H, cfg.d_model), std=0.02, dtype=dt),
                        requires_grad=True,
                    )
                    dec_width += cfg.d_model
                self.dec_embed = Linear(dec_width, cfg.d_model, rng.child("dec_embed"), dtype=dt)
                dec = ModuleList()
                for k in range(cfg.n_seq_cells):
                    if plan is not None:
                        cell_spec = replace(spec, edge_candidates=plan.dec_candidates[k])
                        keep = plan.dec_keep[k]
                    else:
                        cell_spec, keep = spec, None
                    dec.append(
                        SeqCell(
                            cell_spec,
                            "seq_decoder",
                            k,
                            "decoder",
                            cfg.d_model,
                            cfg.L,
                            cfg.H,
                            rng.child(f"dec/{k}"),
                            dropout=cfg.dropout,
                            dtype=dt,
                            keep_edges=keep,
                        )
                    )
                self.dec_cells = dec
            if self.with_linear_decoder:
                self.linear_decoder = Linear(cfg.L, cfg.H, rng.child("lin_dec"), dtype=dt)
                if cfg.linear_decoder_norm:
                    self.linear_decoder_ln = LayerNorm(cfg.d_model, dtype=dt)

            head_kinds = plan.head_kinds if plan else cfg.head_kinds
            heads = ModuleDict()
            for hk in head_kinds:
                heads[hk.value] = make_head(hk, cfg.d_model, cfg.n_targets, rng.child(f"head/{hk.value}"), dtype=dt)
            self.heads = heads
            self.head_kinds = tuple(head_kinds)
        else:
            self.head_kinds = tuple(plan.head_kinds if plan else cfg.head_kinds)

        # ---- architecture parameters ----------------------------------------
        if plan is None:
            arch = ArchParams(dtype=dt)
            if cfg.has_flat:
                spec = cfg.flat_spec()
                for k in range(cfg.n_flat_cells):
                    for dest, src in spec.edges():
                        arch.add(("op", "flat", k, dest, src), len(spec.candidates(dest, src)))
            if cfg.has_seq:
                spec = cfg.seq_spec()
                for group in ("seq_encoder", "seq_decoder"):
                    for k in range(cfg.n_seq_cells):
                        for dest, src in spec.edges():
                            arch.add(("op", group, k, dest, src), len(spec.candidates(dest, src)))
                arch.add(("decoder",), len(DECODER_KINDS))
            arch.add(("head",), len(self.head_kinds))
            if cfg.has_macro_logits:
                arch.add(("macro",), 2)
            self.arch = arch
        else:
            self.arch = FrozenArch()
        self._macro_fixed = plan.macro_weights if plan else None

    # -- parameter partition ------------------------------------------------
    def weight_parameters(self):
        """Named weight tensors; shared tensors appear once (first name wins)."""
        seen = set()
        out = []
        for name, p in self.named_parameters():
            if id(p) in seen:
                continue
            seen.add(id(p))
            out.append((name, p))
        return out

    def arch_parameters(self):
        return self.arch.named_parameters() if isinstance(self.arch, ArchParams) else []

    # -- forward ------------------------------------------------------------
    def _flat_forward(self, x_norm):
        """x_norm: [B, L, N] -> (backcast [B,N,L], forecast [B,N,H])."""
        bc = T.transpose(x_norm, 1, 2)
        B, N, L = bc.shape
        fc = T.zeros((B, N, self.config.H), dtype=bc.dtype)
        stem = (bc, fc)
        outs = [stem, stem]
        for cell in self.flat_cells:
            pair = cell.forward([outs[-1], outs[-2]], self.arch)
            outs.append(pair)
        return outs[-1]

    def _encode(self, x_norm, past_features=None):
        xin = x_norm
        if past_features is not None:
            xin = T.concat([x_norm, past_features], axis=-1)
        trend, seasonal = moving_average_decompose(xin, self.config.ma_kernel)
        stem = self.embed(xin)
        all_bundles = []
        prev = prevprev = None
        out = None
        for k, cell in enumerate(self.enc_cells):
            if k == 0:
                inputs = [self.embed(trend), self.embed(seasonal)]
            else:
                inputs = [prev, prevprev if prevprev is not None else stem]
            out, bundles = cell.forward(inputs, self.arch)
            all_bundles.append(bundles)
            prevprev, prev = prev, out
        return out, all_bundles

    def _decode(self, enc_out, all_bundles, flat_fc_T, future_features=None):
        cfg = self.config
        outs = []
        seq_dec_out = None
        if self.with_seq_decoder:
            parts = []
            if cfg.mode in (MacroMode.Mixed, MacroMode.NoWeights):
                if flat_fc_T is None:
                    raise ContractError("mixed wiring requires the flat forecast for the decoder")
                parts.append(flat_fc_T)
            if cfg.n_future_features > 0:
                if future_features is None:
                    raise ContractError("config declares future features but none were given")
                parts.append(future_features)
            else:
                B = enc_out.shape[0]
                pe = T.reshape(self.posemb, (1,) + self.posemb.shape)
                ones = Tensor(np.ones((B, 1, 1), dtype=self.posemb.dtype))
                parts.append(T.mul(pe, ones))
            dec_in = self.dec_embed(T.concat(parts, axis=-1) if len(parts) > 1 else parts[0])
            ins = [dec_in, dec_in]
            for k, cell in enumerate(self.dec_cells):
                out, _ = cell.forward(ins, self.arch, paired_bundles=all_bundles[k])
                outs.append(out)
                ins = [outs[-1], outs[-2] if k >= 1 else dec_in]
            seq_dec_out = outs[-1]
        lin_out = None
        if self.with_linear_decoder:
            z = T.transpose(self.linear_decoder(T.transpose(enc_out, 1, 2)), 1, 2)
            if cfg.linear_decoder_norm:
                z = self.linear_decoder_ln(z)
            lin_out = z
        if seq_dec_out is None:
            return lin_out
        if lin_out is None:
            return seq_dec_out
        w = self.arch.weights(("decoder",))
        if isinstance(w, np.ndarray):
            return seq_dec_out if w[0] == 1.0 else lin_out
        return T.add(T.mul(seq_dec_out, w[0]), T.mul(lin_out, w[1]))

    def _macro_weights(self):
        cfg = self.config
        if self._macro_fixed is not None:
            return float(self._macro_fixed[0]), float(self._macro_fixed[1])
        if cfg.mode == MacroMode.NoWeights:
            return 1.0, 1.0
        if cfg.has_macro_logits:
            w = self.arch.weights(("macro",))
            if isinstance(w, np.ndarray):
                return float(w[0]), float(w[1])
            return w[0], w[1]
        if cfg.mode == MacroMode.FlatOnly:
            return 0.0, 1.0
        return 1.0, 0.0  # SeqOnly

    def forward(self, past_targets, past_features=None, future_features=None) -> ForecastOutput:
        cfg = self.config
        dt = cfg.np_dtype
        x = _as_dtype_tensor(past_targets, dt)
        pf = _as_dtype_tensor(past_features, dt) if past_features is not None else None
        ff = _as_dtype_tensor(future_features, dt) if future_features is not None else None
        x_norm, state = self.revin.normalize(x)

        flat_fc_T = None
        if cfg.has_flat:
            _, flat_fc = self._flat_forward(x_norm)
            flat_fc_T = T.transpose(flat_fc, 1, 2)  # [B, H, N]

        per_head = {}
        if cfg.has_seq:
            enc_out, bundles = self._encode(x_norm, pf)
            feed_flat = flat_fc_T if cfg.mode in (MacroMode.Mixed, MacroMode.NoWeights) else None
            z = self._decode(enc_out, bundles, feed_flat, ff)
            w_seq, w_flat = self._macro_weights()
            for hk in self.head_kinds:
                h_out = self.heads[hk.value](z)
                if flat_fc_T is not None:
                    flat_term = flat_fc_T
                    if hk == HeadKind.Quantile:
                        flat_term = T.reshape(flat_fc_T, flat_fc_T.shape + (1,))
                    combined = T.add(T.mul(h_out, w_seq), T.mul(flat_term, w_flat))
                else:
                    combined = h_out
                per_head[hk] = combined
        else:
            for hk in self.head_kinds:
                per_head[hk] = flat_fc_T

        bw = self.arch.weights(("head",)) if not self.discrete else np.ones(1)
        point_norm = None
        for i, hk in enumerate(self.head_kinds):
            p = point_forecast(hk, per_head[hk])
            if isinstance(bw, np.ndarray):
                if bw[i] == 0.0:
                    continue
                term = p if bw[i] == 1.0 else T.mul(p, float(bw[i]))
            else:
                term = T.mul(p, bw[i])
            point_norm = term if point_norm is None else T.add(point_norm, term)

        point = self.revin.denormalize(point_norm, state)
        return ForecastOutput(point=point, point_norm=point_norm, per_head=per_head, state=state)

    def loss(self, past_targets, future_targets, past_features=None, future_features=None):
        """Head-weighted training loss in normalized space; returns (loss, output)."""
        out = self.forward(past_targets, past_features, future_features)
        y = _as_dtype_tensor(future_targets, self.config.np_dtype)
        y_norm = self.revin.transform(y, out.state)
        bw = self.arch.weights(("head",)) if not self.discrete else np.ones(1)
        total = None
        for i, hk in enumerate(self.head_kinds):
            if isinstance(bw, np.ndarray):
                wi = float(bw[i])
                if wi == 0.0:
                    continue
                lh = head_loss(hk, out.per_head[hk], y_norm)
                term = lh if wi == 1.0 else T.mul(lh, wi)
            else:
                term = T.mul(head_loss(hk, out.per_head[hk], y_norm), bw[i])
            total = term if total is None else T.add(total, term)
        return total, out

    # -- genotype extraction (after pruning committed everything) ------------
    def extract_genotype(self, provenance=None) -> Genotype:
        if self.discrete:
            raise ContractError("extract_genotype is for supernets")
        cfg = self.config
        arch = self.arch

        def group_cells(group, n_cells, spec):
            cells = []
            for k in range(n_cells):
                nodes = {}
                for dest in range(spec.n_in, spec.n_nodes):
                    pairs = []
                    for dd, src in spec.in_edges(dest):
                        ekey = (group, k, dd, src)
                        if ekey in arch.removed_edges:
                            continue
                        key = ("op",) + ekey
                        if key not in arch.frozen:
                            raise ContractError(f"choice {key} not frozen; run pruning first")
                        kind = spec.candidates(dd, src)[arch.frozen[key]]
                        pairs.append((src, getattr(kind, "value", kind)))
                    nodes[dest] = pairs
                cells.append(CellGenotype(nodes=nodes))
            return cells

        flat = (
            group_cells("flat", cfg.n_flat_cells, cfg.flat_spec()) if cfg.has_flat else None
        )
        enc = dec = None
        decoder_kind = None
        if cfg.has_seq:
            enc = group_cells("seq_encoder", cfg.n_seq_cells, cfg.seq_spec())
            if ("decoder",) not in arch.frozen:
                raise ContractError("decoder choice not frozen; run pruning first")
            decoder_kind = DECODER_KINDS[arch.frozen[("decoder",)]]
            if decoder_kind == "SeqDecoder":
                dec = group_cells("seq_decoder", cfg.n_seq_cells, cfg.seq_spec())
        if ("head",) not in arch.frozen:
            raise ContractError("head choice not frozen; run pruning first")
        head_kind = self.head_kinds[arch.frozen[("head",)]].value

        if cfg.mode == MacroMode.NoWeights:
            macro = [1.0, 1.0]
        elif cfg.mode == MacroMode.FlatOnly:
            macro = [0.0, 1.0]
        elif cfg.mode == MacroMode.SeqOnly:
            macro = [1.0, 0.0]
        else:
            logits = arch.logits(("macro",)).data.astype(np.float64)
            e = np.exp(logits - logits.max())
            w = e / e.sum()
            macro = [float(w[0]), float(w[1])]

        return Genotype(
            search_space=cfg.to_json(),
            flat=flat,
            seq_encoder=enc,
            seq_decoder=dec,
            decoder_kind=decoder_kind,
            head_kind=head_kind,
            macro_weights=macro,
            provenance=provenance or {},
        )

    def load_weights_from(self, other: "ForecastNetwork"):
        """Copy parameters by name (discrete nets take the matching supernet slice)."""
        src = dict(other.named_parameters())
        for name, p in self.named_parameters():
            if name not in src:
                raise ContractError(f"source network lacks parameter {name}")
            p.data = src[name].data.astype(p.data.dtype).copy()


def per_head_forecast(out: ForecastOutput, kind):
    return out.per_head[kind]


class _GenotypePlan:
    """Structural plan a discrete build follows: kept edges, singleton ops."""

    def __init__(self, genotype: Genotype, cfg: NetworkConfig):
        genotype.validate()
        if cfg.has_flat and genotype.flat is None:
            raise GenotypeError("/flat: config mode needs flat cells but genotype has none")
        if cfg.has_seq and genotype.seq_encoder is None:
            raise GenotypeError("/seq_encoder: config mode needs seq cells but genotype has none")
        if genotype.flat is not None and len(genotype.flat) != cfg.n_flat_cells:
            raise GenotypeError(f"/flat: expected {cfg.n_flat_cells} cells")
        if genotype.seq_encoder is not None and len(genotype.seq_encoder) != cfg.n_seq_cells:
            raise GenotypeError(f"/seq_encoder: expected {cfg.n_seq_cells} cells")
        self.decoder_kind = genotype.decoder_kind
        self.head_kinds = (HeadKind(genotype.head_kind),) if genotype.head_kind else ()
        self.macro_weights = tuple(genotype.macro_weights)

        def plan_group(cells, spec, op_enum, extras=None):
            keeps, cands = [], []
            if cells is None:
                return None, None
            for ci, cell in enumerate(cells):
                extra = extras[ci] if extras is not None else frozenset()
                live = self._live_edges(cell, spec, extra)
                keeps.append(live)
                cands.append(
                    tuple(
                        (dest, src, (kind,))
                        for (dest, src), kind in self._edge_ops(cell, op_enum).items()
                        if (dest, src) in live
                    )
                )
            return keeps, cands

        self.flat_keep, self.flat_candidates = plan_group(
            genotype.flat, cfg.flat_spec(), FlatOpKind
        )
        self.dec_keep, self.dec_candidates = plan_group(
            genotype.seq_decoder, cfg.seq_spec(), SeqOpKind
        )
        # Encoder edges paired with live decoder edges must survive even when
        # their own node is dead: their state bundle still feeds the decoder.
        enc_extras = None
        if genotype.seq_encoder is not None and self.dec_keep is not None:
            enc_extras = []
            for ci, cell in enumerate(genotype.seq_encoder):
                present = {
                    (dest, src) for dest, pairs in cell.nodes.items() for src, _k in pairs
                }
                enc_extras.append(frozenset(self.dec_keep[ci] & present))
        self.enc_keep, self.enc_candidates = plan_group(
            genotype.seq_encoder, cfg.seq_spec(), SeqOpKind, extras=enc_extras
        )
        # what each encoder edge must expose, from its paired decoder edge op
        self._dec_ops = (
            [self._edge_ops(c, SeqOpKind) for c in genotype.seq_decoder]
            if genotype.seq_decoder is not None
            else None
        )
        self._dec_keep_sets = self.dec_keep

    @staticmethod
    def _edge_ops(cell: CellGenotype, op_enum):
        out = {}
        for dest, pairs in cell.nodes.items():
            for src, kind in pairs:
                out[(dest, src)] = op_enum(kind)
        return out

    @staticmethod
    def _live_edges(cell: CellGenotype, spec, extra_edges=frozenset()):
        """Edges reachable backwards from the cell output, plus any explicitly
        required edges (bundle feeders) closed over their source nodes."""
        keep = set(extra_edges)
        needed = set()
        stack = [spec.output_node] + [src for _dest, src in extra_edges]
        while stack:
            n = stack.pop()
            if n in needed or n < spec.n_in:
                continue
            needed.add(n)
            for src, _k in cell.nodes.get(n, ()):  # committed in-edges
                keep.add((n, src))
                stack.append(src)
        return keep

    def bundle_needs_fn(self, cell_index):
        def needs(dest, src):
            if self._dec_ops is None:
                return ()
            if (dest, src) not in (self._dec_keep_sets[cell_index] or ()):
                return ()
            kind = self._dec_ops[cell_index].get((dest, src))
            if kind is None:
                return ()
            if kind == SeqOpKind.LSTM:
                return ("full", "last", "gate")
            if kind == SeqOpKind.GRU:
                return ("full", "last")
            if kind in (SeqOpKind.Transformer, SeqOpKind.TCN, SeqOpKind.SepTCN, SeqOpKind.TSMixer):
                return ("full",)
            return ()

        return needs


def build_network(config: NetworkConfig, seed: int) -> ForecastNetwork:
    return ForecastNetwork(config, Rng(seed, "net"))


def build_discrete(genotype: Genotype, config: NetworkConfig, seed: int) -> ForecastNetwork:
    return ForecastNetwork(config, Rng(seed, "net"), genotype=genotype)
