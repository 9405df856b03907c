"""Candidate operations for Seq cells (encoder and decoder roles).

Every encoder op exposes an EncoderStateBundle: its full output map, the
last step's features, and a cell-gate state. LSTM provides the gate state
natively; every other op synthesizes one through a stitch linear layer so
any decoder candidate can sit across from any encoder candidate.

Decoder ops consume the bundle of their positionally paired encoder edge:
LSTM/GRU initialize hidden state from it, Transformer cross-attends to the
full output, and the convolutional/mixer ops prepend the full output on the
time axis before mapping back to the horizon.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import tensor as T
from .nn import Dropout, LayerNorm, Linear, Module
from .rng import Rng
from .tensor import ContractError, Tensor


class SeqOpKind(str, Enum):
    TSMixer = "TSMixer"
    LSTM = "LSTM"
    GRU = "GRU"
    Transformer = "Transformer"
    TCN = "TCN"
    SepTCN = "SepTCN"
    Skip = "Skip"


SEQ_OPS = tuple(SeqOpKind)

TCN_KERNEL = 3
SEPTCN_KERNEL = 5

# Decoder kinds that cannot run without their paired encoder bundle.
STATE_CONSUMERS = {
    SeqOpKind.LSTM,
    SeqOpKind.GRU,
    SeqOpKind.Transformer,
    SeqOpKind.TCN,
    SeqOpKind.SepTCN,
    SeqOpKind.TSMixer,
}


@dataclass
class EncoderStateBundle:
    full_output: T.Tensor  # [B, L, d]
    last_step: T.Tensor  # [B, d]
    cell_gate: T.Tensor  # [B, d]


def edge_dilation(cell_index: int, source_node: int, n_in: int) -> int:
    """Receptive field schedule: deeper positions dilate more, floored at 1."""
    return 2 ** max(0, source_node + cell_index - n_in)


def _require_paired(kind, role, paired):
    if role == "decoder" and kind in STATE_CONSUMERS and paired is None:
        raise ContractError(f"{kind.value} decoder requires the paired encoder state bundle")


class SeqOp(Module):
    """Base: owns the stitch layer that synthesizes cell-gate states."""

    kind: SeqOpKind

    def __init__(self, role, d_model, rng: Rng, dtype=np.float32, with_stitch=True):
        super().__init__()
        self.role = role
        self.d_model = d_model
        if role == "encoder" and with_stitch:
            self.stitch = Linear(d_model, d_model, rng.child("stitch"), dtype=dtype)

    def bundle(self, out, last=None, gate=None) -> EncoderStateBundle:
        last = out[:, -1, :] if last is None else last
        gate = self.stitch(last) if gate is None else gate
        return EncoderStateBundle(full_output=out, last_step=last, cell_gate=gate)


class SkipSeqOp(SeqOp):
    kind = SeqOpKind.Skip

    def __call__(self, x, paired=None):
        return x


class LSTMSeqOp(SeqOp):
    kind = SeqOpKind.LSTM

    def __init__(self, role, d_model, rng: Rng, dtype=np.float32):
        super().__init__(role, d_model, rng, dtype, with_stitch=False)
        self.wx = Linear(d_model, 4 * d_model, rng.child("wx"), dtype=dtype)
        self.wh = Linear(d_model, 4 * d_model, rng.child("wh"), dtype=dtype, bias=False)
        # forget-gate bias starts at 1 so early training passes state through
        self.wx.bias.data[d_model : 2 * d_model] += 1.0
        self._last_state = None

    def __call__(self, x, paired=None):
        _require_paired(self.kind, self.role, paired)
        B, L, d = x.shape
        if self.role == "decoder":
            h, c = paired.last_step, paired.cell_gate
        else:
            h = T.zeros((B, d), dtype=x.dtype)
            c = T.zeros((B, d), dtype=x.dtype)
        hs, c_T = T.lstm_loop(self.wx(x), self.wh.weight, h, c)
        self._last_state = (hs[:, -1, :], c_T)
        return hs

    def bundle(self, out, last=None, gate=None):
        h, c = self._last_state
        self._last_state = None
        return EncoderStateBundle(full_output=out, last_step=h, cell_gate=c)


class GRUSeqOp(SeqOp):
    kind = SeqOpKind.GRU

    def __init__(self, role, d_model, rng: Rng, dtype=np.float32):
        super().__init__(role, d_model, rng, dtype)
        self.wx = Linear(d_model, 3 * d_model, rng.child("wx"), dtype=dtype)
        self.wh = Linear(d_model, 3 * d_model, rng.child("wh"), dtype=dtype, bias=False)

    def __call__(self, x, paired=None):
        _require_paired(self.kind, self.role, paired)
        B, L, d = x.shape
        h = paired.last_step if self.role == "decoder" else T.zeros((B, d), dtype=x.dtype)
        return T.gru_loop(self.wx(x), self.wh.weight, h)


class TSMixerSeqOp(SeqOp):
    """Time-mixing FC across steps plus a 2x-wide feature-mixing MLP."""

    kind = SeqOpKind.TSMixer

    def __init__(self, role, d_model, L_in, L_out, rng: Rng, dropout=0.1, dtype=np.float32):
        super().__init__(role, d_model, rng, dtype)
        # decoder time-mixing maps the (encoder + input) length back to L_out
        t_in = L_in + L_out if role == "decoder" else L_in
        self.time_mix = Linear(t_in, L_out, rng.child("time"), dtype=dtype)
        self.norm1 = LayerNorm(d_model, dtype=dtype)
        self.norm2 = LayerNorm(d_model, dtype=dtype)
        self.feat1 = Linear(d_model, 2 * d_model, rng.child("feat1"), dtype=dtype)
        self.feat2 = Linear(2 * d_model, d_model, rng.child("feat2"), dtype=dtype)
        self.drop = Dropout(dropout, rng.child("drop"))

    def __call__(self, x, paired=None):
        _require_paired(self.kind, self.role, paired)
        xin = x
        if self.role == "decoder":
            xin = T.concat([paired.full_output, x], axis=1)
        u = self.norm1(xin)
        u = T.transpose(self.time_mix(T.transpose(u, 1, 2)), 1, 2)
        u = T.add(x, self.drop(T.relu(u)))
        v = self.norm2(u)
        v = self.feat2(self.drop(T.relu(self.feat1(v))))
        return T.add(u, self.drop(v))


class TransformerSeqOp(SeqOp):
    """Post-LN vanilla block; decoder adds causal self-attn + cross-attn."""

    kind = SeqOpKind.Transformer

    def __init__(self, role, d_model, rng: Rng, dropout=0.1, dtype=np.float32):
        super().__init__(role, d_model, rng, dtype)
        self.n_heads = max(1, d_model // 4)
        r = rng.child("attn")
        self.wq = Linear(d_model, d_model, r.child("q"), dtype=dtype)
        self.wk = Linear(d_model, d_model, r.child("k"), dtype=dtype)
        self.wv = Linear(d_model, d_model, r.child("v"), dtype=dtype)
        self.wo = Linear(d_model, d_model, r.child("o"), dtype=dtype)
        if role == "decoder":
            rx = rng.child("cross")
            self.cq = Linear(d_model, d_model, rx.child("q"), dtype=dtype)
            self.ck = Linear(d_model, d_model, rx.child("k"), dtype=dtype)
            self.cv = Linear(d_model, d_model, rx.child("v"), dtype=dtype)
            self.co = Linear(d_model, d_model, rx.child("o"), dtype=dtype)
            self.norm3 = LayerNorm(d_model, dtype=dtype)
        self.ff1 = Linear(d_model, 4 * d_model, rng.child("ff1"), dtype=dtype)
        self.ff2 = Linear(4 * d_model, d_model, rng.child("ff2"), dtype=dtype)
        self.norm1 = LayerNorm(d_model, dtype=dtype)
        self.norm2 = LayerNorm(d_model, dtype=dtype)
        self.drop = Dropout(dropout, rng.child("drop"))

    def _heads(self, t):
        B, L, d = t.shape
        h = self.n_heads
        return T.permute(T.reshape(t, (B, L, h, d // h)), (0, 2, 1, 3))

    def _merge(self, t):
        B, h, L, dh = t.shape
        return T.reshape(T.permute(t, (0, 2, 1, 3)), (B, L, h * dh))

    def _attend(self, q, k, v, wq, wk, wv, wo, causal):
        a = T.scaled_dot_attention(
            self._heads(wq(q)), self._heads(wk(k)), self._heads(wv(v)), causal=causal
        )
        return wo(self._merge(a))

    def __call__(self, x, paired=None):
        _require_paired(self.kind, self.role, paired)
        causal = self.role == "decoder"
        a = self._attend(x, x, x, self.wq, self.wk, self.wv, self.wo, causal)
        x = self.norm1(T.add(x, self.drop(a)))
        if self.role == "decoder":
            enc = paired.full_output
            a = self._attend(x, enc, enc, self.cq, self.ck, self.cv, self.co, False)
            x = self.norm3(T.add(x, self.drop(a)))
        f = self.ff2(T.gelu(self.ff1(x)))
        return self.norm2(T.add(x, self.drop(f)))


class _ConvSeqOp(SeqOp):
    """Shared wrapper: causal conv -> GELU -> dropout -> residual -> LN.

    Decoders prepend the paired encoder output on the time axis and keep
    only the horizon part, U-Net style feature gathering along time.
    """

    def __init__(self, role, d_model, dilation, rng: Rng, dropout=0.1, dtype=np.float32):
        super().__init__(role, d_model, rng, dtype)
        self.dilation = dilation
        self.norm = LayerNorm(d_model, dtype=dtype)
        self.drop = Dropout(dropout, rng.child("drop"))

    def _conv(self, x):
        raise NotImplementedError

    def __call__(self, x, paired=None):
        _require_paired(self.kind, self.role, paired)
        if self.role == "decoder":
            xin = T.concat([paired.full_output, x], axis=1)
            y = self._conv(xin)[:, paired.full_output.shape[1] :, :]
        else:
            y = self._conv(x)
        return self.norm(T.add(x, self.drop(T.gelu(y))))


class TCNSeqOp(_ConvSeqOp):
    kind = SeqOpKind.TCN

    def __init__(self, role, d_model, dilation, rng: Rng, dropout=0.1, dtype=np.float32):
        super().__init__(role, d_model, dilation, rng, dropout, dtype)
        bound = 1.0 / np.sqrt(d_model * TCN_KERNEL)
        self.w = Tensor(
            rng.child("w").uniform((d_model, d_model, TCN_KERNEL), -bound, bound, dtype=dtype),
            requires_grad=True,
        )
        self.b = Tensor(np.zeros(d_model, dtype=dtype), requires_grad=True)

    def _conv(self, x):
        return T.conv1d_causal(x, self.w, self.b, dilation=self.dilation)


class SepTCNSeqOp(_ConvSeqOp):
    """Depthwise causal conv followed by a pointwise (1x1) linear."""

    kind = SeqOpKind.SepTCN

    def __init__(self, role, d_model, dilation, rng: Rng, dropout=0.1, dtype=np.float32):
        super().__init__(role, d_model, dilation, rng, dropout, dtype)
        bound = 1.0 / np.sqrt(SEPTCN_KERNEL)
        self.w = Tensor(
            rng.child("w").uniform((d_model, SEPTCN_KERNEL), -bound, bound, dtype=dtype),
            requires_grad=True,
        )
        self.b = Tensor(np.zeros(d_model, dtype=dtype), requires_grad=True)
        self.pointwise = Linear(d_model, d_model, rng.child("pw"), dtype=dtype)

    def _conv(self, x):
        return self.pointwise(T.depthwise_conv1d_causal(x, self.w, self.b, dilation=self.dilation))


def make_seq_op(
    kind: SeqOpKind,
    role: str,
    d_model: int,
    L_in: int,
    L_out: int,
    position,
    rng: Rng,
    dropout=0.1,
    dtype=np.float32,
):
    """Build one candidate op. position = (cell_index, source_node, n_in)."""
    cell_index, source_node, n_in = position
    dil = edge_dilation(cell_index, source_node, n_in)
    if kind == SeqOpKind.Skip:
        return SkipSeqOp(role, d_model, rng, dtype=dtype)
    if kind == SeqOpKind.LSTM:
        return LSTMSeqOp(role, d_model, rng, dtype=dtype)
    if kind == SeqOpKind.GRU:
        return GRUSeqOp(role, d_model, rng, dtype=dtype)
    if kind == SeqOpKind.TSMixer:
        return TSMixerSeqOp(role, d_model, L_in, L_out, rng, dropout=dropout, dtype=dtype)
    if kind == SeqOpKind.Transformer:
        return TransformerSeqOp(role, d_model, rng, dropout=dropout, dtype=dtype)
    if kind == SeqOpKind.TCN:
        return TCNSeqOp(role, d_model, dil, rng, dropout=dropout, dtype=dtype)
    if kind == SeqOpKind.SepTCN:
        return SepTCNSeqOp(role, d_model, dil, rng, dropout=dropout, dtype=dtype)
    raise ValueError(f"unknown seq op kind {kind}")
