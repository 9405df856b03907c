"""The discrete architecture: selected ops, kept edges, and frozen choices.

Serialized as JSON with fixed field names:
{search_space, seq_encoder: [cells...], seq_decoder: [cells...] | null,
 flat: [cells...], decoder_kind, head_kind, macro_weights, provenance}

Each cell is a map node -> exactly two [source, op-kind] pairs (the output
node included). Validation enforces the two-edge rule and the decoder
dependency (LinearDecoder genotypes carry no Seq-decoder cells).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

from .flat_ops import FlatOpKind
from .heads import HeadKind
from .seq_ops import SeqOpKind


class GenotypeError(ValueError):
    """Schema or invariant violation; message carries a JSON-pointer-ish path."""


@dataclass
class CellGenotype:
    """node index -> list of (source node, op kind name), exactly two each."""

    nodes: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "nodes": {
                str(n): [[src, kind] for src, kind in pairs]
                for n, pairs in sorted(self.nodes.items())
            }
        }

    @classmethod
    def from_json(cls, obj, path, op_enum):
        if not isinstance(obj, dict) or "nodes" not in obj:
            raise GenotypeError(f"{path}: expected object with 'nodes'")
        nodes = {}
        for key, pairs in obj["nodes"].items():
            try:
                node = int(key)
            except ValueError:
                raise GenotypeError(f"{path}/nodes/{key}: node index must be an integer")
            parsed = []
            for i, item in enumerate(pairs):
                if not (isinstance(item, list) and len(item) == 2):
                    raise GenotypeError(f"{path}/nodes/{key}/{i}: expected [source, op-kind]")
                src, kind = item
                try:
                    parsed.append((int(src), op_enum(kind).value))
                except ValueError:
                    raise GenotypeError(f"{path}/nodes/{key}/{i}: unknown op kind {kind!r}")
            nodes[node] = parsed
        return cls(nodes=nodes)


@dataclass
class Genotype:
    search_space: dict
    flat: list | None  # list[CellGenotype]
    seq_encoder: list | None
    seq_decoder: list | None
    decoder_kind: str | None  # "SeqDecoder" | "LinearDecoder" | None
    head_kind: str | None
    macro_weights: list  # [w_seq, w_flat]
    provenance: dict = field(default_factory=dict)

    def to_json(self):
        return {
            "search_space": self.search_space,
            "seq_encoder": [c.to_json() for c in self.seq_encoder]
            if self.seq_encoder is not None
            else None,
            "seq_decoder": [c.to_json() for c in self.seq_decoder]
            if self.seq_decoder is not None
            else None,
            "flat": [c.to_json() for c in self.flat] if self.flat is not None else None,
            "decoder_kind": self.decoder_kind,
            "head_kind": self.head_kind,
            "macro_weights": [float(w) for w in self.macro_weights],
            "provenance": self.provenance,
        }

    def dumps(self):
        return json.dumps(self.to_json(), indent=2, sort_keys=True)

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())
            fh.write("\n")

    def digest(self):
        return hashlib.sha256(self.dumps().encode()).hexdigest()

    @classmethod
    def from_json(cls, obj):
        for key in (
            "search_space",
            "seq_encoder",
            "seq_decoder",
            "flat",
            "decoder_kind",
            "head_kind",
            "macro_weights",
            "provenance",
        ):
            if key not in obj:
                raise GenotypeError(f"/{key}: missing required field")

        def cells(key, op_enum):
            val = obj[key]
            if val is None:
                return None
            if not isinstance(val, list):
                raise GenotypeError(f"/{key}: expected a list of cells or null")
            return [
                CellGenotype.from_json(c, f"/{key}/{i}", op_enum) for i, c in enumerate(val)
            ]

        decoder_kind = obj["decoder_kind"]
        if decoder_kind not in ("SeqDecoder", "LinearDecoder", None):
            raise GenotypeError(f"/decoder_kind: invalid value {decoder_kind!r}")
        head_kind = obj["head_kind"]
        if head_kind is not None:
            try:
                head_kind = HeadKind(head_kind).value
            except ValueError:
                raise GenotypeError(f"/head_kind: invalid value {head_kind!r}")
        mw = obj["macro_weights"]
        if not (isinstance(mw, list) and len(mw) == 2):
            raise GenotypeError("/macro_weights: expected [w_seq, w_flat]")
        return cls(
            search_space=obj["search_space"],
            flat=cells("flat", FlatOpKind),
            seq_encoder=cells("seq_encoder", SeqOpKind),
            seq_decoder=cells("seq_decoder", SeqOpKind),
            decoder_kind=decoder_kind,
            head_kind=head_kind,
            macro_weights=[float(w) for w in mw],
            provenance=obj["provenance"],
        )

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as e:
                raise GenotypeError(f"not valid JSON: {e}")
        return cls.from_json(obj)

    def validate(self):
        """Check structural invariants; raises GenotypeError on the first hit."""
        if self.decoder_kind == "LinearDecoder" and self.seq_decoder is not None:
            raise GenotypeError("/seq_decoder: must be null when decoder_kind is LinearDecoder")
        if self.decoder_kind == "SeqDecoder" and not self.seq_decoder:
            raise GenotypeError("/seq_decoder: required when decoder_kind is SeqDecoder")
        for w in self.macro_weights:
            if w < 0:
                raise GenotypeError("/macro_weights: weights must be nonnegative")
        for key, group in (
            ("flat", self.flat),
            ("seq_encoder", self.seq_encoder),
            ("seq_decoder", self.seq_decoder),
        ):
            if group is None:
                continue
            for ci, cell in enumerate(group):
                for node, pairs in cell.nodes.items():
                    if len(pairs) != 2:
                        raise GenotypeError(
                            f"/{key}/{ci}/nodes/{node}: needs exactly 2 in-edges, has {len(pairs)}"
                        )
                    for src, _kind in pairs:
                        if src >= node:
                            raise GenotypeError(
                                f"/{key}/{ci}/nodes/{node}: edge source {src} not before node"
                            )
                        if src >= 2 and src not in cell.nodes:
                            raise GenotypeError(
                                f"/{key}/{ci}/nodes/{node}: source node {src} undefined"
                            )
        return self
