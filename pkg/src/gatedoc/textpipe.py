"""Text preprocessing: sentence segmentation, vocabulary, tokenization,
stream assembly, label bucketing, dataset loading and batching.

A document becomes the stream ``[CLS] s_1 [SEP] s_2 [SEP] ...`` where
each sentence is closed by a separator token whose encoder output later
serves as that sentence's embedding.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, UsageError

logger = logging.getLogger(__name__)

RESERVED_TOKENS = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[S]")
PAD_ID, UNK_ID, CLS_ID, SEP_ID, START_ID = range(5)

# Sentence boundaries are . ! ? followed by whitespace and then an
# uppercase letter, digit, or quote.  Periods closing these tokens never
# split; decimal points are protected implicitly because no whitespace
# follows them.
ABBREVIATIONS = frozenset(
    {"mr.", "mrs.", "ms.", "dr.", "prof.", "sr.", "jr.", "st.",
     "e.g.", "i.e.", "etc.", "vs.", "u.s."}
)
_TERMINATORS = ".!?"
_QUOTES = "\"'“”‘’«»‹›"

_WORD_RE = re.compile(r"\w+|[^\w\s]")

SCHEMES = {
    # scheme -> (min score, max score, number of classes)
    "ten_scale": (1, 10, 10),
    "three_way": (1, 5, 3),
}


@dataclass(frozen=True)
class RawDocument:
    id: str
    text: str
    score: int


@dataclass(frozen=True)
class Limits:
    max_sentences: int = 50
    max_stream_len: int = 512


@dataclass
class Vocab:
    token_to_id: dict
    id_to_token: list

    def __len__(self):
        return len(self.id_to_token)

    def lookup(self, token):
        return self.token_to_id.get(token, UNK_ID)


@dataclass
class TokenizedDocument:
    """A document ready for the encoder.

    `token_stream` starts with [CLS] and closes every sentence with a
    [SEP] whose position is recorded in `sep_positions`.
    """

    id: str
    sentences: list
    token_stream: list
    sep_positions: list
    sentence_spans: list
    label: int | None
    n_classes: int


@dataclass
class LoadedDataset:
    documents: list
    skipped: int


def scheme_n_classes(scheme):
    if scheme not in SCHEMES:
        raise UsageError(f"unknown label scheme {scheme!r}")
    return SCHEMES[scheme][2]


def bucket_label(score, scheme, doc_id=None):
    """Map an integer review score to a class index.

    ten_scale: class = score - 1.  three_way: <3 negative (0),
    =3 neutral (1), >3 positive (2).
    """
    if scheme not in SCHEMES:
        raise UsageError(f"unknown label scheme {scheme!r}")
    lo, hi, _ = SCHEMES[scheme]
    if not isinstance(score, int) or isinstance(score, bool) or not lo <= score <= hi:
        where = f" in document {doc_id!r}" if doc_id else ""
        raise DataError(f"score {score!r} outside [{lo}, {hi}] for {scheme}{where}")
    if scheme == "ten_scale":
        return score - 1
    if score < 3:
        return 0
    if score == 3:
        return 1
    return 2


def segment_sentences(text):
    """Split text into (sentence, (start, end)) character spans.

    Splits after . ! ? followed by whitespace and an uppercase letter,
    digit, or quote, protecting the built-in abbreviation list.  Spans
    are disjoint, ordered, and cover every non-whitespace character;
    text with no terminator yields a single sentence.
    """
    if not text:
        raise UsageError("cannot segment empty text")
    n = len(text)
    bounds = []
    for i, ch in enumerate(text):
        if ch in _TERMINATORS and _is_boundary(text, i):
            bounds.append(i + 1)

    sentences = []
    start = _next_nonspace(text, 0)
    for b in bounds:
        if start is None or start >= b:
            continue
        sentences.append((text[start:b], (start, b)))
        start = _next_nonspace(text, b)
    if start is not None:
        end = _last_nonspace(text) + 1
        if end > start:
            sentences.append((text[start:end], (start, end)))
    return sentences


def _is_boundary(text, i):
    n = len(text)
    ch = text[i]
    if ch == ".":
        if i + 1 < n and i >= 1 and text[i - 1].isdigit() and text[i + 1].isdigit():
            return False  # decimal point
        w = i
        while w > 0 and not text[w - 1].isspace():
            w -= 1
        if text[w : i + 1].lower() in ABBREVIATIONS:
            return False
    k = i + 1
    if k >= n or not text[k].isspace():
        return False
    while k < n and text[k].isspace():
        k += 1
    if k >= n:
        return False
    nxt = text[k]
    return nxt.isupper() or nxt.isdigit() or nxt in _QUOTES


def _next_nonspace(text, i):
    while i < len(text):
        if not text[i].isspace():
            return i
        i += 1
    return None


def _last_nonspace(text):
    i = len(text) - 1
    while i >= 0 and text[i].isspace():
        i -= 1
    return i


def tokenize_words(text):
    """Lowercased word tokens; punctuation marks are their own tokens."""
    return _WORD_RE.findall(text.lower())


def tokenize(text, vocab):
    """Token ids for one sentence; out-of-vocabulary words map to [UNK]."""
    return [vocab.lookup(tok) for tok in tokenize_words(text)]


def build_vocab(corpus, min_freq=2, max_size=20000):
    """Frequency-capped word vocabulary over raw documents.

    Ties at the size cap break lexicographically; identical corpora
    produce identical vocabularies.
    """
    corpus = list(corpus)
    if not corpus:
        raise UsageError("cannot build a vocabulary from an empty corpus")
    counts = {}
    for doc in corpus:
        for tok in tokenize_words(doc.text):
            counts[tok] = counts.get(tok, 0) + 1
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )[:max_size]
    id_to_token = list(RESERVED_TOKENS) + kept
    token_to_id = {tok: i for i, tok in enumerate(id_to_token)}
    return Vocab(token_to_id=token_to_id, id_to_token=id_to_token)


def save_vocab(vocab, path):
    """One non-reserved token per line; line number = id - 5."""
    with open(path, "w", encoding="utf-8") as fh:
        for tok in vocab.id_to_token[len(RESERVED_TOKENS) :]:
            fh.write(tok + "\n")


def load_vocab(path):
    with open(path, encoding="utf-8") as fh:
        tokens = [line.rstrip("\n") for line in fh if line.rstrip("\n")]
    return vocab_from_tokens(tokens)


def vocab_from_tokens(tokens):
    id_to_token = list(RESERVED_TOKENS) + list(tokens)
    return Vocab(
        token_to_id={tok: i for i, tok in enumerate(id_to_token)},
        id_to_token=id_to_token,
    )


def assemble_document(
    tokenized_sentences, spans, limits, *, doc_id, label, n_classes
):
    """Build the [CLS]/[SEP] stream from per-sentence token ids.

    Empty sentences are dropped.  Sentences beyond the max-sentence
    limit are cut from the end; if the stream would still exceed the
    length limit, whole trailing sentences go first and the last kept
    sentence is truncated to fit its closing [SEP].
    """
    sents = [(list(ids), span) for ids, span in zip(tokenized_sentences, spans) if ids]
    if not sents:
        raise DataError(f"document {doc_id!r} has no tokens after tokenization")
    sents = sents[: limits.max_sentences]

    def total(items):
        return 1 + sum(len(ids) + 1 for ids, _ in items)

    while len(sents) > 1 and total(sents) > limits.max_stream_len:
        sents.pop()
    if total(sents) > limits.max_stream_len:
        ids, span = sents[0]
        sents[0] = (ids[: limits.max_stream_len - 2], span)

    stream = [CLS_ID]
    sep_positions = []
    for ids, _ in sents:
        stream.extend(ids)
        stream.append(SEP_ID)
        sep_positions.append(len(stream) - 1)
    return TokenizedDocument(
        id=doc_id,
        sentences=[ids for ids, _ in sents],
        token_stream=stream,
        sep_positions=sep_positions,
        sentence_spans=[span for _, span in sents],
        label=label,
        n_classes=n_classes,
    )


def prepare_document(raw, scheme, vocab, limits):
    """RawDocument -> TokenizedDocument (label bucketed, stream built)."""
    label = bucket_label(raw.score, scheme, doc_id=raw.id)
    segments = segment_sentences(raw.text)
    ids = [tokenize(s, vocab) for s, _ in segments]
    spans = [span for _, span in segments]
    return assemble_document(
        ids, spans, limits,
        doc_id=raw.id, label=label, n_classes=scheme_n_classes(scheme),
    )


def read_raw_dataset(path, scheme):
    """Parse a JSON-lines file of {"id", "text", "score"} records.

    Malformed lines and out-of-range scores are skipped with a counted
    warning; an empty result is a data error.
    """
    lo, hi, _ = SCHEMES[scheme] if scheme in SCHEMES else (None, None, None)
    if lo is None:
        raise UsageError(f"unknown label scheme {scheme!r}")
    docs = []
    skipped = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                doc_id = obj["id"]
                text = obj["text"]
                score = obj["score"]
                if (
                    not isinstance(doc_id, str)
                    or not isinstance(text, str)
                    or not text
                    or not isinstance(score, int)
                    or isinstance(score, bool)
                ):
                    raise ValueError("bad field types")
                if not lo <= score <= hi:
                    raise ValueError(f"score {score} outside [{lo}, {hi}]")
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                skipped += 1
                logger.warning("%s:%d skipped: %s", path, lineno, exc)
                continue
            docs.append(RawDocument(id=doc_id, text=text, score=score))
    if not docs:
        raise DataError(f"no valid documents in {path}")
    return LoadedDataset(documents=docs, skipped=skipped)


def load_dataset(path, scheme, vocab, limits):
    """One TokenizedDocument per valid line of a JSON-lines file, in order."""
    raw = read_raw_dataset(path, scheme)
    docs = []
    skipped = raw.skipped
    for rd in raw.documents:
        try:
            docs.append(prepare_document(rd, scheme, vocab, limits))
        except DataError as exc:
            skipped += 1
            logger.warning("%s: document %r skipped: %s", path, rd.id, exc)
    if not docs:
        raise DataError(f"no usable documents in {path}")
    return LoadedDataset(documents=docs, skipped=skipped)


def shuffle_split(items, seed, ratios=(0.8, 0.1, 0.1)):
    """Deterministic seeded shuffle, then an 80/10/10 (by default) split."""
    items = list(items)
    order = np.random.default_rng(seed).permutation(len(items))
    shuffled = [items[i] for i in order]
    n = len(shuffled)
    n_train = int(n * ratios[0])
    n_dev = int(n * ratios[1])
    return (
        shuffled[:n_train],
        shuffled[n_train : n_train + n_dev],
        shuffled[n_train + n_dev :],
    )


def make_batches(items, batch_size):
    """Consecutive chunks of at most `batch_size` documents."""
    if batch_size < 1:
        raise UsageError(f"batch_size must be >= 1, got {batch_size}")
    return [items[i : i + batch_size] for i in range(0, len(items), batch_size)]


def split_and_batch(documents, seed, batch_size, ratios=(0.8, 0.1, 0.1)):
    """Shuffle by seed, split train/dev/test, and batch each stream."""
    train, dev, test = shuffle_split(documents, seed, ratios)
    return (
        make_batches(train, batch_size),
        make_batches(dev, batch_size),
        make_batches(test, batch_size),
    )
