"""Training loop, accuracy evaluation, and the four-row ablation run.

Training is fully seeded: parameter init consumes one generator in a
fixed order and each epoch's batch order comes from (seed, epoch), so a
given (config, seed, data) triple reproduces the same history and the
same final parameters bit for bit.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad
from . import model as modmod
from .errors import TrainingError, UsageError
from .stats import welch_ttest
from .textpipe import make_batches

logger = logging.getLogger(__name__)

ABLATION_VARIANTS = (
    ("The whole model", {}),
    ("- Class similarity embedding for a sentence", {"use_sentence_class_sim": False}),
    ("- Gated sentence embedding", {"use_gate": False}),
    ("- Class similarity embedding for a document", {"use_document_class_sim": False}),
)


@dataclass
class EvalResult:
    accuracy: float
    correct: int
    total: int
    predictions: list


@dataclass
class TrainResult:
    params: modmod.ModelParams
    history: list
    best_epoch: int
    best_dev_accuracy: float


@dataclass
class AblationRow:
    label: str
    test_accuracy: float
    dev_accuracy: float
    test_accuracies: list
    p_value_vs_full: float | None


@dataclass
class AblationTable:
    rows: list

    def to_dict(self):
        return {
            "rows": [
                {
                    "label": r.label,
                    "test_accuracy": r.test_accuracy,
                    "dev_accuracy": r.dev_accuracy,
                    "test_accuracies": r.test_accuracies,
                    "p_value_vs_full": r.p_value_vs_full,
                }
                for r in self.rows
            ]
        }


def evaluate(params, documents):
    """Accuracy = correct / total over all documents, plus the predictions."""
    documents = list(documents)
    if not documents:
        raise UsageError("evaluate needs a non-empty dataset")
    predictions = []
    correct = 0
    for doc in documents:
        if doc.label is None:
            raise UsageError(f"document {doc.id!r} has no gold label")
        pred = modmod.predict(doc, params)
        predictions.append(pred)
        if pred.predicted == doc.label:
            correct += 1
    return EvalResult(
        accuracy=correct / len(documents),
        correct=correct,
        total=len(documents),
        predictions=predictions,
    )


def _batch_step(batch, params, named, optimizer, batch_index):
    ad.zero_grad([t for _, t in named])
    dtype = params.dtype()
    inv = 1.0 / len(batch)
    losses = []
    for doc in batch:
        result = modmod.forward(doc, params)
        target = modmod.one_hot(doc.label, params.n_classes, dtype)
        loss = ad.bce_loss(result.probs, target)
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingError(
                f"non-finite loss in batch {batch_index} on document {doc.id!r}"
            )
        losses.append(value)
        ad.backward(ad.scale(loss, inv))
    grads = {
        name: (t.grad if t.grad is not None else np.zeros_like(t.data))
        for name, t in named
    }
    ad.adam_step(dict(named), grads, optimizer)
    return losses


def train(train_docs, dev_docs, config, vocab_size):
    """Train a model; keep the best-dev checkpoint; stop on patience."""
    train_docs = list(train_docs)
    dev_docs = list(dev_docs)
    if not train_docs or not dev_docs:
        raise UsageError("train needs non-empty train and dev splits")
    params = modmod.build_model(config, vocab_size)
    named = params.named_parameters()
    optimizer = ad.OptimizerState(learning_rate=config.learning_rate)
    history = []
    best_acc = -1.0
    best_epoch = -1
    best_snapshot = None
    bad_epochs = 0
    for epoch in range(config.max_epochs):
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_docs))
        shuffled = [train_docs[i] for i in order]
        epoch_losses = []
        for b, batch in enumerate(make_batches(shuffled, config.batch_size)):
            epoch_losses.extend(_batch_step(batch, params, named, optimizer, b))
        dev = evaluate(params, dev_docs)
        entry = {
            "epoch": epoch,
            "train_loss": float(np.mean(epoch_losses)),
            "dev_accuracy": dev.accuracy,
        }
        history.append(entry)
        logger.info(
            "epoch %d: train_loss %.6f dev_accuracy %.4f",
            epoch, entry["train_loss"], dev.accuracy,
        )
        if dev.accuracy >= best_acc:
            # ties keep the most recent checkpoint (the most-trained model
            # among equals); patience counts only strict improvements
            if dev.accuracy > best_acc:
                bad_epochs = 0
            else:
                bad_epochs += 1
            best_acc = dev.accuracy
            best_epoch = epoch
            best_snapshot = {name: t.data.copy() for name, t in named}
        else:
            bad_epochs += 1
        if bad_epochs >= config.patience:
            break
    if best_snapshot is not None:
        for name, t in named:
            t.data = best_snapshot[name]
    return TrainResult(
        params=params,
        history=history,
        best_epoch=best_epoch,
        best_dev_accuracy=best_acc,
    )


def write_metrics(history, path):
    """Metrics as JSON lines (epoch, train_loss, dev_accuracy); atomic write."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        for entry in history:
            fh.write(json.dumps(entry, sort_keys=True) + "\n")
    os.replace(tmp, path)


def ablation_run(config, train_docs, dev_docs, test_docs, vocab_size, seeds=None):
    """Train the full model and the three single-removal variants.

    All variants share seeds and data.  With two or more seeds, each
    variant row carries a Welch t-test p-value against the full model
    over the per-seed test accuracies.
    """
    seeds = list(seeds) if seeds else [config.seed]
    rows = []
    full_accs = None
    for label, overrides in ABLATION_VARIANTS:
        test_accs = []
        dev_accs = []
        for seed in seeds:
            variant = replace(config, seed=seed, **overrides)
            result = train(train_docs, dev_docs, variant, vocab_size)
            test_accs.append(evaluate(result.params, test_docs).accuracy)
            dev_accs.append(evaluate(result.params, dev_docs).accuracy)
        if full_accs is None:
            full_accs = test_accs
            p_value = None
        elif len(seeds) >= 2:
            _, p_value = welch_ttest(full_accs, test_accs)
        else:
            p_value = None
        rows.append(
            AblationRow(
                label=label,
                test_accuracy=test_accs[0],
                dev_accuracy=dev_accs[0],
                test_accuracies=test_accs,
                p_value_vs_full=p_value,
            )
        )
    return AblationTable(rows=rows)
