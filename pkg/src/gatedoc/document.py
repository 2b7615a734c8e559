"""Document encoder: learned per-sentence importance gates, a forward
GRU over the gated sentence embeddings, and a one-step decoder with
dot-product attention that yields the document embedding.

GRU orientation, fixed throughout (and matched by the test oracles):
    z = sigmoid(W_z x + U_z h + b_z)
    r = sigmoid(W_r x + U_r h + b_r)
    h~ = tanh(W_h x + U_h (r * h) + b_h)
    h' = (1 - z) * h + z * h~
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError, UsageError


@dataclass
class GateParams:
    mode: str  # "scalar": one row, one score per sentence; "vector": square matrix
    w_g: Tensor


@dataclass
class GruCellParams:
    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    def tensors(self):
        return list(self.__dict__.items())


@dataclass
class DocEncoderParams:
    enc_cell: GruCellParams
    bridge_w: Tensor
    bridge_b: Tensor
    start_emb: Tensor
    dec_cell: GruCellParams


@dataclass
class ImportanceProfile:
    """Per-sentence gate scores for one document, aligned to text spans.

    When the gate variant is disabled the scores are 0.5 placeholders
    and `gate_enabled` is False.
    """

    gate_scores: list
    sentence_spans: list
    doc_id: str
    predicted: int | None = None
    gold: int | None = None
    gate_enabled: bool = True
    sentence_texts: list | None = None


def init_gate(rng, width, mode, dtype):
    # W_g starts at zero (every gate exactly 0.5): a random projection here,
    # under Adam's scale-free steps, saturates all gates within the first
    # epoch and permanently freezes the importance mechanism at desk scale.
    # Gradients flow fine from zero since the gate multiplies its input.
    if mode not in ("scalar", "vector"):
        raise UsageError(f"unknown gate mode {mode!r}")
    del rng  # kept for signature symmetry with the other init helpers
    rows = 1 if mode == "scalar" else width
    return GateParams(
        mode=mode, w_g=ad.parameter("gate.w_g", np.zeros((rows, width), dtype=dtype))
    )


def init_gru_cell(rng, d_in, d_hidden, dtype, prefix):
    def gate_params(tag):
        return (
            ad.parameter(f"{prefix}.w_{tag}", ad.xavier_uniform(rng, d_in, d_hidden, dtype)),
            ad.parameter(f"{prefix}.u_{tag}", ad.xavier_uniform(rng, d_hidden, d_hidden, dtype)),
            ad.parameter(f"{prefix}.b_{tag}", np.zeros((1, d_hidden), dtype=dtype)),
        )

    w_z, u_z, b_z = gate_params("z")
    w_r, u_r, b_r = gate_params("r")
    w_h, u_h, b_h = gate_params("h")
    return GruCellParams(w_z, u_z, b_z, w_r, u_r, b_r, w_h, u_h, b_h)


def init_doc_encoder(rng, d_in, d_g, dtype):
    return DocEncoderParams(
        enc_cell=init_gru_cell(rng, d_in, d_g, dtype, "docenc.enc"),
        bridge_w=ad.parameter("docenc.bridge_w", ad.xavier_uniform(rng, d_g, d_g, dtype)),
        bridge_b=ad.parameter("docenc.bridge_b", np.zeros((1, d_g), dtype=dtype)),
        start_emb=ad.parameter("docenc.start_emb", ad.xavier_uniform(rng, 1, d_g, dtype)),
        dec_cell=init_gru_cell(rng, 2 * d_g, d_g, dtype, "docenc.dec"),
    )


def gate(e_prime, gp, clamp=None):
    """Importance scores and the gated sentence matrix.

    Scalar mode: g_i = sigmoid(w_g . E'_i), row i scaled by g_i.
    Vector mode: per-coordinate sigmoid gates, elementwise product; the
    reported score is the mean gate of the row.

    `clamp` maps sentence index -> fixed gate score, bypassing the
    sigmoid for that row (diagnostics only; no gradient flows through a
    clamped gate).  Returns (scores as float64 per sentence, E'').
    """
    n, width = e_prime.shape
    if gp.w_g.shape[1] != width:
        raise DimensionError(
            f"gate width {gp.w_g.shape[1]} does not match embedding width {width}"
        )
    z = ad.matmul(e_prime, ad.transpose(gp.w_g))  # (n, 1) or (n, width)
    g = ad.sigmoid(z)
    if clamp:
        keep = np.ones(g.shape, dtype=g.data.dtype)
        fixed = np.zeros(g.shape, dtype=g.data.dtype)
        for idx, value in clamp.items():
            keep[idx] = 0.0
            fixed[idx] = value
        g = ad.add(ad.mul(g, Tensor(keep)), Tensor(fixed))
    if gp.mode == "scalar":
        gated = ad.scale_rows(e_prime, g)
    else:
        gated = ad.mul(g, e_prime)
    # report in float64 from the pre-activations so scores stay inside (0, 1)
    z64 = z.data.astype(np.float64)
    scores = 1.0 / (1.0 + np.exp(-np.abs(z64)))
    scores = np.where(z64 >= 0, scores, 1.0 - scores)
    scores = scores.mean(axis=1) if gp.mode == "vector" else scores[:, 0]
    if clamp:
        for idx, value in clamp.items():
            scores[idx] = value
    return scores, gated


def gru_cell(x, h_prev, cell):
    """One GRU step for a row vector input and row vector state."""
    if x.shape[1] != cell.w_z.shape[0] or h_prev.shape[1] != cell.u_z.shape[0]:
        raise DimensionError(
            f"gru_cell: input {x.shape} / state {h_prev.shape} do not match "
            f"weights {cell.w_z.shape} / {cell.u_z.shape}"
        )
    z = ad.sigmoid(ad.add(ad.add(ad.matmul(x, cell.w_z), ad.matmul(h_prev, cell.u_z)), cell.b_z))
    r = ad.sigmoid(ad.add(ad.add(ad.matmul(x, cell.w_r), ad.matmul(h_prev, cell.u_r)), cell.b_r))
    h_cand = ad.tanh(
        ad.add(ad.add(ad.matmul(x, cell.w_h), ad.matmul(ad.mul(r, h_prev), cell.u_h)), cell.b_h)
    )
    one = Tensor(np.ones((1, 1), dtype=x.data.dtype))
    return ad.add(ad.mul(ad.sub(one, z), h_prev), ad.mul(z, h_cand))


def encode_sequence(e_dprime, cell):
    """Forward GRU states over the gated sentence rows, from a zero state."""
    n = e_dprime.shape[0]
    if n < 1:
        raise DimensionError("encode_sequence needs at least one sentence row")
    d_g = cell.u_z.shape[0]
    h = Tensor(np.zeros((1, d_g), dtype=e_dprime.data.dtype))
    states = []
    for i in range(n):
        x = ad.slice_axis(e_dprime, 0, i, i + 1)
        h = gru_cell(x, h, cell)
        states.append(h)
    return ad.concat_all(states, axis=0)


def attend(encs, query):
    """Dot-product attention: weights over encoder states and their weighted sum."""
    if query.shape != (1, encs.shape[1]):
        raise DimensionError(
            f"attend: query shape {query.shape} does not match states {encs.shape}"
        )
    scores = ad.matmul(encs, ad.transpose(query))  # (n, 1)
    a = ad.softmax(scores, axis=0)
    cnt = ad.matmul(ad.transpose(a), encs)  # (1, d_g)
    return a, cnt


def decode_document(encs, dp):
    """One-step decode: document embedding and the attention weights.

    dec_0 = tanh-FNN(enc_n) is both the attention query and the
    decoder's initial state; the decoder input is the start-symbol
    embedding concatenated with the context vector.
    """
    n = encs.shape[0]
    if n < 1:
        raise DimensionError("decode_document needs at least one encoder state")
    enc_n = ad.slice_axis(encs, 0, n - 1, n)
    dec0 = ad.tanh(ad.add(ad.matmul(enc_n, dp.bridge_w), dp.bridge_b))
    a, cnt = attend(encs, dec0)
    x = ad.concat(dp.start_emb, cnt, axis=1)
    e_d = gru_cell(x, dec0, dp.dec_cell)
    return e_d, a
