"""Command-line interface.

Subcommands: train, eval, predict, explain, ablate, analyze, gradcheck.
Every command writes its results as JSON to --out (train writes JSON
lines of per-epoch metrics).  Exit codes: 0 success, 1 usage error,
2 data error, 3 internal fault.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from . import autodiff as ad
from .analysis import error_histogram, explain, stddev_report
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config
from .errors import DataError, GatedocError, UsageError
from .heatmap import render_heatmap
from .model import build_model, forward, one_hot, predict
from .textpipe import (
    build_vocab,
    load_dataset,
    prepare_document,
    read_raw_dataset,
    shuffle_split,
)
from .training import ablation_run, evaluate, train, write_metrics

logger = logging.getLogger(__name__)

GRADCHECK_THRESHOLD = 1e-4


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); route through our codes
        raise UsageError(f"{message}\n{self.format_usage()}")


def _write_json(obj, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2)
        fh.write("\n")
    os.replace(tmp, path)


def _write_text(text, path):
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_config(args):
    if not args.config:
        raise UsageError("--config is required for this command")
    config = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config.validate()


def _prepare_splits(config):
    """Raw corpus -> (train, dev, test) tokenized docs + vocab built on train."""
    limits = config.limits()
    if config.train_data:
        train_raw = read_raw_dataset(config.train_data, config.scheme).documents
        dev_raw = read_raw_dataset(config.dev_data, config.scheme).documents
        test_raw = read_raw_dataset(config.test_data, config.scheme).documents
    elif config.data:
        full = read_raw_dataset(config.data, config.scheme).documents
        train_raw, dev_raw, test_raw = shuffle_split(full, config.seed)
    else:
        raise UsageError("config needs either data or train_data/dev_data/test_data")
    if not train_raw or not dev_raw or not test_raw:
        raise DataError("one of the train/dev/test splits is empty")
    vocab = build_vocab(train_raw, min_freq=config.min_freq, max_size=config.max_vocab)

    def prep(raws, name):
        docs = []
        for raw in raws:
            try:
                docs.append(prepare_document(raw, config.scheme, vocab, limits))
            except DataError as exc:
                logger.warning("%s split: skipped %r: %s", name, raw.id, exc)
        if not docs:
            raise DataError(f"{name} split has no usable documents")
        return docs

    return prep(train_raw, "train"), prep(dev_raw, "dev"), prep(test_raw, "test"), vocab


def _prediction_record(pred, doc_id):
    return {
        "id": doc_id,
        "predicted": pred.predicted,
        "gold": pred.gold,
        "probs": pred.probs,
        "gate_scores": pred.importance.gate_scores,
        "gate_enabled": pred.importance.gate_enabled,
    }


def cmd_train(args):
    config = _load_config(args)
    train_docs, dev_docs, test_docs, vocab = _prepare_splits(config)
    result = train(train_docs, dev_docs, config, vocab_size=len(vocab))
    if args.out:
        write_metrics(result.history, args.out)
    if args.checkpoint:
        save_checkpoint(result.params, config, vocab, args.checkpoint)
    test = evaluate(result.params, test_docs)
    print(
        f"best dev accuracy {result.best_dev_accuracy:.4f} (epoch {result.best_epoch}); "
        f"test accuracy {test.accuracy:.4f}"
    )
    return 0


def cmd_eval(args):
    params, config, vocab = load_checkpoint(_require(args, "checkpoint"))
    data = load_dataset(_require(args, "data"), config.scheme, vocab, config.limits())
    result = evaluate(params, data.documents)
    payload = {
        "accuracy": result.accuracy,
        "correct": result.correct,
        "total": result.total,
        "skipped": data.skipped,
    }
    if args.out:
        _write_json(payload, args.out)
    print(f"accuracy {result.accuracy:.4f} ({result.correct}/{result.total})")
    return 0


def cmd_predict(args):
    params, config, vocab = load_checkpoint(_require(args, "checkpoint"))
    records = []
    if args.text:
        profile, pred = explain(params, config, vocab, args.text)
        records.append(_prediction_record(pred, "input"))
    elif args.data:
        data = load_dataset(args.data, config.scheme, vocab, config.limits())
        for doc in data.documents:
            records.append(_prediction_record(predict(doc, params), doc.id))
    else:
        raise UsageError("predict needs --text or --data")
    payload = {"predictions": records}
    if args.out:
        _write_json(payload, args.out)
    for rec in records:
        print(f"{rec['id']}: class {rec['predicted']}")
    return 0


def cmd_explain(args):
    params, config, vocab = load_checkpoint(_require(args, "checkpoint"))
    if not args.text:
        raise UsageError("explain needs --text")
    profile, pred = explain(params, config, vocab, args.text)
    page = render_heatmap(profile)
    if args.out:
        _write_text(page, args.out)
    if args.report:
        _write_json(
            {
                "prediction": _prediction_record(pred, "input"),
                "sentences": [
                    {"text": t, "span": list(span), "gate_score": s}
                    for t, span, s in zip(
                        profile.sentence_texts,
                        profile.sentence_spans,
                        profile.gate_scores,
                    )
                ],
            },
            args.report,
        )
    print(f"predicted class {pred.predicted}; {len(profile.gate_scores)} sentences")
    return 0


def cmd_ablate(args):
    config = _load_config(args)
    train_docs, dev_docs, test_docs, vocab = _prepare_splits(config)
    seeds = [config.seed + i for i in range(args.seeds)]
    table = ablation_run(
        config, train_docs, dev_docs, test_docs, vocab_size=len(vocab), seeds=seeds
    )
    if args.out:
        _write_json(table.to_dict(), args.out)
    width = max(len(r.label) for r in table.rows)
    for row in table.rows:
        extra = "" if row.p_value_vs_full is None else f"  p={row.p_value_vs_full:.5f}"
        print(
            f"{row.label:<{width}}  test {row.test_accuracy:.4f} "
            f"(dev {row.dev_accuracy:.4f}){extra}"
        )
    return 0


def cmd_analyze(args):
    params, config, vocab = load_checkpoint(_require(args, "checkpoint"))
    data = load_dataset(_require(args, "data"), config.scheme, vocab, config.limits())
    result = evaluate(params, data.documents)
    report = stddev_report(params, data.documents)
    hist = error_histogram(result.predictions, config.scheme)
    payload = {
        "accuracy": result.accuracy,
        "stddev_report": report.to_dict(),
        "score_diff_histogram": hist.to_dict(),
    }
    if args.out:
        _write_json(payload, args.out)
    print(
        f"accuracy {result.accuracy:.4f}; "
        f"stddev > 0.2 in {report.fraction_over_0_2:.1%} of {report.n_documents} documents; "
        f"{hist.n_wrong} wrong predictions"
    )
    return 0


def _gradcheck_model():
    """A tiny 64-bit model and a 2-sentence document for the end-to-end check."""
    config = TrainConfig(
        scheme="three_way",
        d_tok=4, d_h=4, n_heads=1, n_layers=1,
        d_class=3, d_class_hidden=3, d_g=4, d_out_hidden=4,
        max_sentences=8, max_stream_len=32, dtype="float64",
    ).validate()
    return config


def cmd_gradcheck(args):
    from .textpipe import CLS_ID, SEP_ID, TokenizedDocument

    config = _gradcheck_model()
    rng = np.random.default_rng(args.seed if args.seed is not None else 0)
    vocab_size = 16
    params = build_model(config, vocab_size=vocab_size, rng=rng, dtype="float64")
    body = [int(t) for t in rng.integers(5, vocab_size, size=4)]
    doc = TokenizedDocument(
        id="gradcheck",
        sentences=[body[:2], body[2:]],
        token_stream=[CLS_ID] + body[:2] + [SEP_ID] + body[2:] + [SEP_ID],
        sep_positions=[3, 6],
        sentence_spans=[(0, 1), (1, 2)],
        label=2,
        n_classes=config.n_classes,
    )
    named = params.named_parameters()
    target = one_hot(doc.label, config.n_classes, np.float64)

    def f():
        return ad.bce_loss(forward(doc, params).probs, target)

    worst = ad.grad_check(f, [t for _, t in named])
    payload = {"max_relative_error": worst, "threshold": GRADCHECK_THRESHOLD}
    if args.out:
        _write_json(payload, args.out)
    print(f"max relative error: {worst:.3e}")
    if worst < GRADCHECK_THRESHOLD:
        return 0
    print("gradient check FAILED", file=sys.stderr)
    return 3


def _require(args, name):
    value = getattr(args, name, None)
    if not value:
        raise UsageError(f"--{name} is required for this command")
    return value


def build_parser():
    parser = _Parser(prog="gatedoc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, config=False, checkpoint=False, data=False, text=False):
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="write results (JSON) here")
        if config:
            p.add_argument("--config", default=None, help="key = value config file")
        if checkpoint:
            p.add_argument("--checkpoint", default=None, help="checkpoint path")
        if data:
            p.add_argument("--data", default=None, help="JSON-lines dataset path")
        if text:
            p.add_argument("--text", default=None, help="raw document text")

    p = sub.add_parser("train", help="train a model from a config")
    common(p, config=True, checkpoint=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="accuracy of a checkpoint on a dataset")
    common(p, checkpoint=True, data=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("predict", help="classify raw text or a dataset")
    common(p, checkpoint=True, data=True, text=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("explain", help="render a sentence-importance heatmap")
    common(p, checkpoint=True, text=True)
    p.add_argument("--report", default=None, help="also write the profile as JSON here")
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("ablate", help="train the full model and its three ablations")
    common(p, config=True)
    p.add_argument("--seeds", type=int, default=1, help="seeds per variant (>=2 adds t-tests)")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("analyze", help="stddev report and error histogram on a dataset")
    common(p, checkpoint=True, data=True)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("gradcheck", help="end-to-end finite-difference gradient check")
    common(p)
    p.set_defaults(func=cmd_gradcheck)

    return parser


def main(argv=None):
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except GatedocError as exc:
        print(f"internal fault: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
