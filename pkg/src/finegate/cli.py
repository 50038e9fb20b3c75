"""Command-line interface: generate / train / eval / gate-report."""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .checkpoint import load_reader, save_reader
from .data import load_split, load_vocabularies
from .metrics import metrics_table
from .model import ModelConfig, Reader
from .report import export_gate_report
from .synthetic import generate_synthetic
from .train import TrainConfig, train

TASK_TO_HEAD = {"cloze": "cloze", "span": "span", "tags": "tags"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="finegate",
        description="Fine-grained word/character gating readers at desk scale")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic dataset directory")
    gen.add_argument("--task", required=True, choices=["cloze_morph", "tag_pred"])
    gen.add_argument("--train", type=int, default=2000, help="training examples")
    gen.add_argument("--dev", type=int, default=500, help="dev examples")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output dataset directory")

    tr = sub.add_parser("train", help="train a reader on a dataset directory")
    tr.add_argument("--task", required=True, choices=sorted(TASK_TO_HEAD))
    tr.add_argument("--data", required=True, help="dataset directory")
    tr.add_argument("--train-split", default="train")
    tr.add_argument("--dev-split", default="dev")
    tr.add_argument("--combiner", default="finegate",
                    choices=["word", "char", "concat", "featconcat", "scalargate",
                             "finegate"])
    tr.add_argument("--interaction", default="fg", choices=["ga", "fg"])
    tr.add_argument("--layers", type=int, default=2, help="K, the layer count")
    tr.add_argument("--hidden", type=int, default=32, help="RNN units per direction")
    tr.add_argument("--embed", type=int, default=16, help="word/char embedding size")
    tr.add_argument("--dropout", type=float, default=0.0)
    tr.add_argument("--optimizer", default="adam", choices=["sgd", "adam"])
    tr.add_argument("--lr", type=float, default=5e-4)
    tr.add_argument("--batch-size", type=int, default=32)
    tr.add_argument("--clip-norm", type=float, default=10.0)
    tr.add_argument("--patience", type=int, default=None)
    tr.add_argument("--seed", type=int, default=0)
    tr.add_argument("--epochs", type=int, default=30)
    tr.add_argument("--fix-embeddings", action="store_true",
                    help="do not update word embeddings during training")
    tr.add_argument("--out", required=True, help="checkpoint path to write")

    ev = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--data", required=True, help="dataset directory")
    ev.add_argument("--split", default="dev")
    ev.add_argument("--metrics", default=None, help="write metrics CSV here")

    gr = sub.add_parser("gate-report", help="export gate analysis CSVs")
    gr.add_argument("--checkpoint", required=True)
    gr.add_argument("--data", required=True, help="dataset directory")
    gr.add_argument("--split", default="train")
    gr.add_argument("--out", required=True, help="feature CSV path; the token "
                    "table goes to <out>.tokens.csv next to it")
    return parser


def _cmd_generate(args) -> int:
    generate_synthetic(args.task, args.out, args.train, args.dev, args.seed)
    print(f"wrote {args.task} dataset ({args.train} train / {args.dev} dev) "
          f"to {args.out}")
    return 0


def _cmd_train(args) -> int:
    vocab = load_vocabularies(args.data)
    train_data = load_split(args.data, args.train_split, vocab)
    dev_data = load_split(args.data, args.dev_split, vocab)
    expected = TASK_TO_HEAD[args.task]
    if train_data.task != expected:
        print(f"error: dataset task is {train_data.task!r}, not {expected!r}",
              file=sys.stderr)
        return 2
    config = ModelConfig(
        layers=args.layers, hidden=args.hidden, embed=args.embed,
        combiner=args.combiner, interaction=args.interaction, head=expected,
        vocab_size=len(vocab.words), alphabet_size=len(vocab.chars),
        ner_tags=vocab.tags.ner_tags, pos_tags=vocab.tags.pos_tags,
        n_tags=len(vocab.labels) if vocab.labels else 0,
        dropout=args.dropout, trainable_embeddings=not args.fix_embeddings)
    reader = Reader(config, seed=args.seed)
    tc = TrainConfig(optimizer=args.optimizer, learning_rate=args.lr,
                     batch_size=args.batch_size, epochs=args.epochs,
                     clip_norm=args.clip_norm, seed=args.seed,
                     patience=args.patience)

    def log(epoch, loss, metric):
        print(f"epoch {epoch:3d}  train loss {loss:.4f}  dev {metric:.4f}",
              flush=True)

    result = train(reader, train_data, dev_data, tc, log=log)
    save_reader(args.out, reader,
                extra={"_freq_binner.edges": np.asarray(vocab.binner.bin_edges)})
    print(f"best dev {result.best_metric:.4f} at epoch {result.best_epoch}; "
          f"checkpoint written to {args.out}")
    return 0


def _print_table(rows: dict[str, float]) -> None:
    width = max(len(k) for k in rows)
    for key, value in rows.items():
        print(f"{key:<{width}}  {value:.4f}")


def _cmd_eval(args) -> int:
    reader, _ = load_reader(args.checkpoint)
    data = load_split(args.data, args.split)
    rows = metrics_table(reader, data)
    _print_table(rows)
    if args.metrics:
        with open(args.metrics, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value"])
            for key, value in rows.items():
                writer.writerow([key, f"{value:.10g}"])
        print(f"metrics CSV written to {args.metrics}")
    return 0


def _cmd_gate_report(args) -> int:
    reader, _ = load_reader(args.checkpoint)
    data = load_split(args.data, args.split)
    report = export_gate_report(reader, data, args.out)
    print(f"feature means written to {args.out}")
    print("top tokens by mean gate (char-leaning):")
    for surface, value, count in report.top_tokens(50):
        print(f"  {surface:<16s} {value:.4f}  (x{count})")
    print("bottom tokens by mean gate (word-leaning):")
    for surface, value, count in report.bottom_tokens(50):
        print(f"  {surface:<16s} {value:.4f}  (x{count})")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"generate": _cmd_generate, "train": _cmd_train,
               "eval": _cmd_eval, "gate-report": _cmd_gate_report}[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
