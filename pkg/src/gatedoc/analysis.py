"""Model explanation machinery: per-sentence importance profiles for raw
text, the distribution of importance spread across a dataset, and the
score-difference histogram over wrong predictions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UsageError
from .model import predict
from .textpipe import assemble_document, scheme_n_classes, segment_sentences, tokenize


@dataclass
class StddevReport:
    """Spread of min-max-normalized gate scores per document.

    `stddevs` is sorted ascending; population standard deviations of
    values in [0, 1] are bounded by 0.5.
    """

    stddevs: list
    fraction_over_0_2: float
    n_documents: int

    def to_dict(self):
        return {
            "stddevs": self.stddevs,
            "fraction_over_0_2": self.fraction_over_0_2,
            "n_documents": self.n_documents,
        }


@dataclass
class ScoreDiffHistogram:
    """Wrong predictions bucketed by |predicted - gold| in scale points.

    Cumulative fractions are None when there are no wrong predictions.
    """

    counts: dict
    n_wrong: int
    cumulative_at_1: float | None
    cumulative_at_2: float | None

    def to_dict(self):
        return {
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "n_wrong": self.n_wrong,
            "cumulative_at_1": self.cumulative_at_1,
            "cumulative_at_2": self.cumulative_at_2,
        }


def minmax_normalize(scores):
    """Rescale to [0, 1]; an all-equal sequence (incl. length 1) maps to zeros."""
    arr = np.asarray(scores, dtype=np.float64)
    span = arr.max() - arr.min()
    if span == 0.0:
        return np.zeros_like(arr)
    return (arr - arr.min()) / span


def explain(params, config, vocab, text):
    """Segment raw text, run the model, and align gate scores to spans."""
    if not text or not text.strip():
        raise UsageError("explain needs non-empty text")
    segments = segment_sentences(text)
    if not segments:
        raise UsageError("text could not be segmented into sentences")
    ids = [tokenize(s, vocab) for s, _ in segments]
    spans = [span for _, span in segments]
    doc = assemble_document(
        ids, spans, config.limits(),
        doc_id="input", label=None, n_classes=scheme_n_classes(config.scheme),
    )
    prediction = predict(doc, params)
    profile = prediction.importance
    profile.sentence_texts = [text[s:e] for s, e in profile.sentence_spans]
    return profile, prediction


def stddev_report(params, documents):
    """Per-document stddev of normalized gate scores, sorted ascending."""
    documents = list(documents)
    if not documents:
        raise UsageError("stddev_report needs a non-empty dataset")
    if not params.use_gate:
        raise UsageError("stddev_report requires a model trained with the gate enabled")
    stddevs = []
    for doc in documents:
        pred = predict(doc, params)
        normalized = minmax_normalize(pred.importance.gate_scores)
        stddevs.append(float(normalized.std()))  # population stddev
    stddevs.sort()
    over = sum(1 for s in stddevs if s > 0.2)
    return StddevReport(
        stddevs=stddevs,
        fraction_over_0_2=over / len(stddevs),
        n_documents=len(stddevs),
    )


def error_histogram(predictions, scheme):
    """Bucket wrong predictions by class-index distance on the label scale.

    For three_way the distance is ordinal over class indices, with the
    neutral class sitting between negative and positive.
    """
    scheme_n_classes(scheme)  # raises on unknown scheme
    counts = {}
    n_wrong = 0
    for pred in predictions:
        if pred.gold is None:
            raise UsageError("error_histogram needs labeled predictions")
        if pred.predicted == pred.gold:
            continue
        n_wrong += 1
        diff = abs(pred.predicted - pred.gold)
        counts[diff] = counts.get(diff, 0) + 1
    if n_wrong == 0:
        return ScoreDiffHistogram(
            counts={}, n_wrong=0, cumulative_at_1=None, cumulative_at_2=None
        )
    at_1 = sum(v for k, v in counts.items() if k <= 1) / n_wrong
    at_2 = sum(v for k, v in counts.items() if k <= 2) / n_wrong
    return ScoreDiffHistogram(
        counts=counts, n_wrong=n_wrong, cumulative_at_1=at_1, cumulative_at_2=at_2
    )
