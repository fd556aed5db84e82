"""Command-line entry point: `python -m codemix <command> ...`.

Commands:
    train-bpe       learn the subword vocabulary from a training corpus
    train           train the ensemble and write the best checkpoint and the per-epoch CSV
    eval            score a checkpoint on labeled data
    predict         classify (possibly unlabeled) data into JSON lines
    export-vectors  export sentence vectors and their 2-D projections as CSV
    sys-info        print package versions for bug reports

Exit codes: 0 success, 1 usage or validation error, 2 data or format error, 3 numerical failure.
"""

import argparse
import logging
import sys

import codemix
from codemix.common.errors import CheckpointError, ConfigError, NumericalError
from codemix.common.utils.utils import init_logging

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with `EXIT_USAGE` instead of argparse's default 2, which is reserved for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_checkpoint_args(parser: argparse.ArgumentParser):
    parser.add_argument("--data", type=str, required=True, help="Corpus file in the block format.")
    parser.add_argument("--checkpoint", type=str, required=True, help="Checkpoint written by `train`.")
    parser.add_argument(
        "--vocab",
        type=str,
        default=None,
        help="Optional vocabulary file. Its hash must match the one embedded in the checkpoint.",
    )
    parser.add_argument(
        "--force",
        action="store_true",
        help="Load the checkpoint even when `--vocab` does not match its embedded vocabulary.",
    )
    parser.add_argument(
        "--ensemble-mode",
        type=str,
        default=None,
        choices=codemix.available_ensemble_modes,
        help="Combination rule. Defaults to the one the checkpoint was trained with.",
    )


def make_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="codemix", description="Sentiment analysis of code-mixed tweets.")
    subparsers = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    train_bpe = subparsers.add_parser("train-bpe", help="Learn the subword vocabulary.")
    train_bpe.add_argument("--corpus", type=str, required=True, help="Training corpus in the block format.")
    train_bpe.add_argument("--vocab-size", type=int, default=8000, help="Final vocabulary size, reserved ids included.")
    train_bpe.add_argument("--out", type=str, required=True, help="Where to write the vocabulary JSON.")
    train_bpe.add_argument(
        "--translit-rules", type=str, default=None, help="Transliteration rule table (`source<TAB>target` lines)."
    )
    train_bpe.add_argument(
        "--translit-lang",
        type=str,
        default="lang2",
        choices=codemix.available_lang_tags,
        help="Language tag whose tokens get transliterated.",
    )

    train = subparsers.add_parser("train", help="Train the ensemble.")
    train.add_argument("--train", type=str, required=True, help="Labeled training corpus.")
    train.add_argument("--val", type=str, default=None, help="Labeled validation corpus used for model selection.")
    train.add_argument("--vocab", type=str, required=True, help="Vocabulary written by `train-bpe`.")
    train.add_argument("--config", type=str, default=None, help="YAML or JSON file with flat TrainConfig keys.")
    train.add_argument("--out-checkpoint", type=str, required=True, help="Where to write the best checkpoint.")
    train.add_argument(
        "--translit-rules", type=str, default=None, help="Transliteration rule table (`source<TAB>target` lines)."
    )
    train.add_argument(
        "--log-csv", type=str, default=None, help="Per-epoch CSV. Defaults to the checkpoint path with a .csv suffix."
    )
    train.add_argument("--seed", type=int, default=None, help="Overrides the seed of the config.")
    train.add_argument(
        "overrides",
        nargs="*",
        help="Any key=value arguments to override config values (e.g. epochs=30 dropout_rate=0.3).",
    )

    evaluate = subparsers.add_parser("eval", help="Score a checkpoint on labeled data.")
    _add_checkpoint_args(evaluate)
    evaluate.add_argument("--out-report", type=str, default=None, help="Where to write the metrics JSON.")

    predict = subparsers.add_parser("predict", help="Classify data into JSON lines.")
    _add_checkpoint_args(predict)
    predict.add_argument("--out", type=str, required=True, help="Where to write the JSON-lines predictions.")

    export = subparsers.add_parser("export-vectors", help="Export sentence vectors and their projections.")
    _add_checkpoint_args(export)
    export.add_argument("--out", type=str, required=True, help="Where to write the CSV.")

    subparsers.add_parser("sys-info", help="Print package versions.")
    return parser


def _run(args) -> int:
    # Imported lazily so that `--help` stays fast.
    if args.command == "train-bpe":
        from codemix.scripts.train_bpe import train_bpe_cli

        return train_bpe_cli(args)
    if args.command == "train":
        from codemix.scripts.train import train_cli

        return train_cli(args)
    if args.command == "eval":
        from codemix.scripts.eval import eval_cli

        return eval_cli(args)
    if args.command == "predict":
        from codemix.scripts.predict import predict_cli

        return predict_cli(args)
    if args.command == "export-vectors":
        from codemix.scripts.export_vectors import export_vectors_cli

        return export_vectors_cli(args)
    if args.command == "sys-info":
        from codemix.scripts.display_sys_info import display_sys_info

        display_sys_info()
        return EXIT_OK
    raise ValueError(f"Unknown command {args.command}.")


def main(argv: list[str] | None = None) -> int:
    init_logging()
    args = make_parser().parse_args(argv)
    try:
        return _run(args)
    except NumericalError as e:
        logging.error(f"Numerical failure: {e}")
        return EXIT_NUMERIC
    except ConfigError as e:
        logging.error(f"Invalid configuration: {e}")
        return EXIT_USAGE
    except (ValueError, IndexError, CheckpointError, OSError) as e:
        logging.error(f"{type(e).__name__}: {e}")
        return EXIT_DATA
