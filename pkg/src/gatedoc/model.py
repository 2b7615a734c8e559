"""Full model: parameter construction with ablation switches, the
forward pass over one tokenized document, and the sigmoid classifier
head.

Disabling a variant flag removes its parameters entirely rather than
zeroing them; the class matrix is stored once and shared by the
sentence-side and document-side similarity paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import document as docmod
from . import encoder as encmod
from .autodiff import Tensor
from .errors import DimensionError, UsageError


@dataclass
class Prediction:
    probs: list
    predicted: int
    gold: int | None
    importance: docmod.ImportanceProfile


@dataclass
class ForwardResult:
    """Graph-connected output of one document forward."""

    probs: Tensor
    gate_scores: np.ndarray
    attention: np.ndarray
    gate_enabled: bool


@dataclass
class ModelParams:
    n_classes: int
    use_sentence_class_sim: bool
    use_gate: bool
    use_document_class_sim: bool
    attention_scope: str
    encoder: encmod.EncoderParams
    sent_sim: encmod.ClassSimilarity | None
    doc_sim: encmod.ClassSimilarity | None
    gate: docmod.GateParams | None
    doc_encoder: docmod.DocEncoderParams
    out_w1: Tensor
    out_b1: Tensor
    out_w2: Tensor
    out_b2: Tensor

    def named_parameters(self):
        """All trainable tensors in a fixed order; W_c appears exactly once."""
        out = list(self.encoder.tensors())
        if self.sent_sim is not None:
            out.append(("classsim.w_c", self.sent_sim.w_c))
            out.extend((f"classsim.sent.{k}", t) for k, t in self.sent_sim.fnn_tensors())
        elif self.doc_sim is not None:
            out.append(("classsim.w_c", self.doc_sim.w_c))
        if self.doc_sim is not None:
            out.extend((f"classsim.doc.{k}", t) for k, t in self.doc_sim.fnn_tensors())
        if self.gate is not None:
            out.append(("gate.w_g", self.gate.w_g))
        out.extend((f"docenc.enc.{k}", t) for k, t in self.doc_encoder.enc_cell.tensors())
        out.append(("docenc.bridge_w", self.doc_encoder.bridge_w))
        out.append(("docenc.bridge_b", self.doc_encoder.bridge_b))
        out.append(("docenc.start_emb", self.doc_encoder.start_emb))
        out.extend((f"docenc.dec.{k}", t) for k, t in self.doc_encoder.dec_cell.tensors())
        out.extend(
            [
                ("head.w1", self.out_w1),
                ("head.b1", self.out_b1),
                ("head.w2", self.out_w2),
                ("head.b2", self.out_b2),
            ]
        )
        names = [n for n, _ in out]
        if len(names) != len(set(names)):
            raise DimensionError("duplicate parameter names in model")
        return out

    def param_dict(self):
        return dict(self.named_parameters())

    def n_parameters(self):
        return sum(int(t.data.size) for _, t in self.named_parameters())

    def dtype(self):
        return self.encoder.tok_emb.data.dtype


def build_model(config, vocab_size, rng=None, dtype=None):
    """Construct randomly initialized parameters for a config.

    Initialization draws from `rng` in a fixed parameter order, so a
    given (config, seed) pair always produces the same model.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    dtype = np.dtype(dtype if dtype is not None else config.dtype)
    n_classes = config.n_classes
    enc = encmod.init_encoder(
        rng,
        vocab_size=vocab_size,
        d_tok=config.d_tok,
        d_h=config.d_h,
        n_heads=config.n_heads,
        n_layers=config.n_layers,
        max_len=config.max_stream_len,
        dtype=dtype,
    )
    w_c = None
    if config.use_sentence_class_sim or config.use_document_class_sim:
        w_c = ad.parameter(
            "classsim.w_c", ad.xavier_uniform(rng, n_classes, config.d_class, dtype)
        )
    sent_sim = None
    if config.use_sentence_class_sim:
        sent_sim = encmod.init_class_similarity(
            rng, w_c, config.d_h, config.d_class_hidden, config.d_class, dtype,
            "classsim.sent",
        )
    doc_sim = None
    if config.use_document_class_sim:
        doc_sim = encmod.init_class_similarity(
            rng, w_c, config.d_g, config.d_class_hidden, config.d_class, dtype,
            "classsim.doc",
        )
    e_prime_width = config.d_h + (n_classes if config.use_sentence_class_sim else 0)
    gate = None
    if config.use_gate:
        gate = docmod.init_gate(rng, e_prime_width, config.gate_mode, dtype)
    doc_encoder = docmod.init_doc_encoder(rng, e_prime_width, config.d_g, dtype)
    head_in = config.d_g + (n_classes if config.use_document_class_sim else 0)
    d_hidden = config.resolved_d_out_hidden()
    return ModelParams(
        n_classes=n_classes,
        use_sentence_class_sim=config.use_sentence_class_sim,
        use_gate=config.use_gate,
        use_document_class_sim=config.use_document_class_sim,
        attention_scope=config.attention_scope,
        encoder=enc,
        sent_sim=sent_sim,
        doc_sim=doc_sim,
        gate=gate,
        doc_encoder=doc_encoder,
        out_w1=ad.parameter("head.w1", ad.xavier_uniform(rng, head_in, d_hidden, dtype)),
        out_b1=ad.parameter("head.b1", np.zeros((1, d_hidden), dtype=dtype)),
        out_w2=ad.parameter("head.w2", ad.xavier_uniform(rng, d_hidden, n_classes, dtype)),
        out_b2=ad.parameter("head.b2", np.zeros((1, n_classes), dtype=dtype)),
    )


def classify_head(e_d, mp):
    """Per-class sigmoid scores from the document embedding (1 x n_classes)."""
    if mp.use_document_class_sim:
        c_d = encmod.class_similarity(e_d, mp.doc_sim)
        head_in = ad.concat(e_d, c_d, axis=1)
    else:
        head_in = e_d
    if head_in.shape[1] != mp.out_w1.shape[0]:
        raise DimensionError(
            f"classifier head expects width {mp.out_w1.shape[0]}, got {head_in.shape[1]}"
        )
    h = ad.relu(ad.add(ad.matmul(head_in, mp.out_w1), mp.out_b1))
    return ad.sigmoid(ad.add(ad.matmul(h, mp.out_w2), mp.out_b2))


def forward(doc, mp, gate_clamp=None):
    """Sentence encoder -> gated document encoder -> classifier head."""
    segments = None
    if mp.attention_scope == "sentence":
        segments = encmod.segments_from_seps(len(doc.token_stream), doc.sep_positions)
    encoded = encmod.transformer_encode(doc.token_stream, mp.encoder, segments=segments)
    e = encmod.extract_sentence_embeddings(encoded, doc.sep_positions)
    if mp.use_sentence_class_sim:
        c = encmod.class_similarity(e, mp.sent_sim)
        e_prime = encmod.enrich(e, c)
    else:
        e_prime = e
    if mp.use_gate:
        scores, e_dprime = docmod.gate(e_prime, mp.gate, clamp=gate_clamp)
    else:
        scores = np.full(e_prime.shape[0], 0.5)
        e_dprime = e_prime
    encs = docmod.encode_sequence(e_dprime, mp.doc_encoder.enc_cell)
    e_d, a = docmod.decode_document(encs, mp.doc_encoder)
    probs = classify_head(e_d, mp)
    return ForwardResult(
        probs=probs,
        gate_scores=scores,
        attention=a.data.reshape(-1).astype(np.float64),
        gate_enabled=mp.use_gate,
    )


def predict(doc, mp):
    """Forward one document into a Prediction with its importance profile."""
    result = forward(doc, mp)
    probs = result.probs.data.reshape(-1)
    predicted = int(np.argmax(probs))  # lowest index wins ties
    profile = docmod.ImportanceProfile(
        gate_scores=[float(s) for s in result.gate_scores],
        sentence_spans=list(doc.sentence_spans),
        doc_id=doc.id,
        predicted=predicted,
        gold=doc.label,
        gate_enabled=result.gate_enabled,
    )
    return Prediction(
        probs=[float(p) for p in probs],
        predicted=predicted,
        gold=doc.label,
        importance=profile,
    )


def one_hot(label, n_classes, dtype):
    if not 0 <= label < n_classes:
        raise UsageError(f"label {label} outside [0, {n_classes})")
    t = np.zeros((1, n_classes), dtype=dtype)
    t[0, label] = 1.0
    return Tensor(t)
