"""Sentence encoder: a parameter-shared transformer over the
[CLS]/[SEP] token stream, separator-output extraction, and the
class-similarity enrichment of each sentence embedding.

One transformer layer's weights are applied at every depth, so the
parameter count is independent of the layer count.  Blocks are
pre-norm residual: x + Attn(LN(x)), then x + FFN(LN(x)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import DimensionError

LAYER_NORM_EPS = 1e-5


@dataclass
class EncoderParams:
    """Embedding tables, input projection, and the one shared layer."""

    n_layers: int
    n_heads: int
    tok_emb: Tensor
    pos_emb: Tensor
    w_in: Tensor
    b_in: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    wq: Tensor
    bq: Tensor
    wk: Tensor
    bk: Tensor
    wv: Tensor
    bv: Tensor
    wo: Tensor
    bo: Tensor
    ln2_g: Tensor
    ln2_b: Tensor
    w_ff1: Tensor
    b_ff1: Tensor
    w_ff2: Tensor
    b_ff2: Tensor

    def tensors(self):
        skip = ("n_layers", "n_heads")
        return [(k, v) for k, v in self.__dict__.items() if k not in skip]


@dataclass
class ClassSimilarity:
    """One side's ReLU FNN into class space plus the shared class matrix.

    `w_c` holds one row per target class; the sentence-side and
    document-side instances reference the same tensor object.
    """

    w_c: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def fnn_tensors(self):
        return [(k, v) for k, v in self.__dict__.items() if k != "w_c"]


def init_encoder(rng, vocab_size, d_tok, d_h, n_heads, n_layers, max_len, dtype):
    if d_h % n_heads != 0:
        raise DimensionError(f"d_h {d_h} not divisible by n_heads {n_heads}")

    def xu(r, c):
        return ad.xavier_uniform(rng, r, c, dtype)

    def zrow(name, c):
        return ad.parameter(name, np.zeros((1, c), dtype=dtype))

    def orow(name, c):
        return ad.parameter(name, np.ones((1, c), dtype=dtype))

    return EncoderParams(
        n_layers=n_layers,
        n_heads=n_heads,
        tok_emb=ad.parameter("encoder.tok_emb", xu(vocab_size, d_tok)),
        pos_emb=ad.parameter("encoder.pos_emb", xu(max_len, d_tok)),
        w_in=ad.parameter("encoder.w_in", xu(d_tok, d_h)),
        b_in=zrow("encoder.b_in", d_h),
        ln1_g=orow("encoder.ln1_g", d_h),
        ln1_b=zrow("encoder.ln1_b", d_h),
        wq=ad.parameter("encoder.wq", xu(d_h, d_h)),
        bq=zrow("encoder.bq", d_h),
        wk=ad.parameter("encoder.wk", xu(d_h, d_h)),
        bk=zrow("encoder.bk", d_h),
        wv=ad.parameter("encoder.wv", xu(d_h, d_h)),
        bv=zrow("encoder.bv", d_h),
        wo=ad.parameter("encoder.wo", xu(d_h, d_h)),
        bo=zrow("encoder.bo", d_h),
        ln2_g=orow("encoder.ln2_g", d_h),
        ln2_b=zrow("encoder.ln2_b", d_h),
        w_ff1=ad.parameter("encoder.w_ff1", xu(d_h, 4 * d_h)),
        b_ff1=zrow("encoder.b_ff1", 4 * d_h),
        w_ff2=ad.parameter("encoder.w_ff2", xu(4 * d_h, d_h)),
        b_ff2=zrow("encoder.b_ff2", d_h),
    )


def init_class_similarity(rng, w_c, d_in, d_hidden, d_class, dtype, prefix):
    return ClassSimilarity(
        w_c=w_c,
        w1=ad.parameter(f"{prefix}.w1", ad.xavier_uniform(rng, d_in, d_hidden, dtype)),
        b1=ad.parameter(f"{prefix}.b1", np.zeros((1, d_hidden), dtype=dtype)),
        w2=ad.parameter(f"{prefix}.w2", ad.xavier_uniform(rng, d_hidden, d_class, dtype)),
        b2=ad.parameter(f"{prefix}.b2", np.zeros((1, d_class), dtype=dtype)),
    )


_MASKED_SCORE = -1e9


def segments_from_seps(stream_len, sep_positions):
    """Segment id per stream position: 0 for [CLS], i+1 for sentence i.

    Each sentence's tokens and its closing [SEP] share a segment.
    """
    segments = [0] * stream_len
    seg = 1
    pos = 1
    for sep in sep_positions:
        for p in range(pos, sep + 1):
            segments[p] = seg
        pos = sep + 1
        seg += 1
    return segments


def _attention_mask(segments, dtype):
    seg = np.asarray(segments)
    mask = np.where(seg[:, None] == seg[None, :], 0.0, _MASKED_SCORE)
    return Tensor(mask.astype(dtype))


def _self_attention(x, p, mask):
    n, d_h = x.shape
    dk = d_h // p.n_heads
    q = ad.add(ad.matmul(x, p.wq), p.bq)
    k = ad.add(ad.matmul(x, p.wk), p.bk)
    v = ad.add(ad.matmul(x, p.wv), p.bv)
    heads = []
    inv = 1.0 / math.sqrt(dk)
    for h in range(p.n_heads):
        lo, hi = h * dk, (h + 1) * dk
        qh = ad.slice_axis(q, 1, lo, hi)
        kh = ad.slice_axis(k, 1, lo, hi)
        vh = ad.slice_axis(v, 1, lo, hi)
        scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), inv)
        if mask is not None:
            scores = ad.add(scores, mask)
        attn = ad.softmax(scores, axis=1)
        heads.append(ad.matmul(attn, vh))
    merged = ad.concat_all(heads, axis=1)
    return ad.add(ad.matmul(merged, p.wo), p.bo)


def _shared_layer(x, p, mask):
    a = ad.layer_norm(x, p.ln1_g, p.ln1_b, eps=LAYER_NORM_EPS)
    x = ad.add(x, _self_attention(a, p, mask))
    f = ad.layer_norm(x, p.ln2_g, p.ln2_b, eps=LAYER_NORM_EPS)
    ff = ad.add(
        ad.matmul(ad.relu(ad.add(ad.matmul(f, p.w_ff1), p.b_ff1)), p.w_ff2), p.b_ff2
    )
    return ad.add(x, ff)


def transformer_encode(stream, params, segments=None):
    """Contextual embeddings for every stream position (stream_len x d_h).

    With n_layers = 0 the result is just the projected token+position
    embeddings.  When `segments` is given, self-attention is restricted
    to positions sharing a segment id (sentence-scoped attention); with
    None every position attends to the whole stream.
    """
    n = len(stream)
    max_len = params.pos_emb.shape[0]
    if n > max_len:
        raise DimensionError(f"stream of {n} tokens exceeds max length {max_len}")
    if segments is not None and len(segments) != n:
        raise DimensionError(
            f"segments length {len(segments)} does not match stream length {n}"
        )
    tok = ad.gather_rows(params.tok_emb, stream)
    pos = ad.gather_rows(params.pos_emb, list(range(n)))
    x = ad.add(ad.matmul(ad.add(tok, pos), params.w_in), params.b_in)
    mask = None if segments is None else _attention_mask(segments, x.data.dtype)
    for _ in range(params.n_layers):
        x = _shared_layer(x, params, mask)
    return x


def extract_sentence_embeddings(encoded, sep_positions):
    """Rows of the encoded stream at the separator positions."""
    n = encoded.shape[0]
    for pos in sep_positions:
        if not 0 <= pos < n:
            raise DimensionError(
                f"separator position {pos} outside stream of length {n} (assembly bug)"
            )
    return ad.gather_rows(encoded, list(sep_positions))


def class_similarity(e_in, cs):
    """Inner products with each class embedding: rows W_c . FNN(e) (k x n_classes)."""
    if e_in.shape[1] != cs.w1.shape[0]:
        raise DimensionError(
            f"class similarity expects width {cs.w1.shape[0]}, got {e_in.shape[1]}"
        )
    h = ad.relu(ad.add(ad.matmul(e_in, cs.w1), cs.b1))
    f = ad.relu(ad.add(ad.matmul(h, cs.w2), cs.b2))
    return ad.matmul(f, ad.transpose(cs.w_c))


def enrich(e, c):
    """Row-wise concatenation [E_i ; C_i] (width d_h + n_classes)."""
    if e.shape[0] != c.shape[0]:
        raise DimensionError(f"enrich: row counts differ ({e.shape[0]} vs {c.shape[0]})")
    return ad.concat(e, c, axis=1)
