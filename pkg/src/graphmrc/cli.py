"""Command line interface: parse, synth, train, eval, explain.

Exit codes: 0 success, 1 validation error (bad inputs, schema violations),
2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .data import DatasetError, load_dataset, save_dataset, validate_examples
from .encoder import InputError
from .explain import export_explanation
from .lexicon import LexiconError, load_lexicon
from .model import TwoBranchModel
from .pipeline import parse_text
from .synth import MODES, generate_synthetic
from .training import TrainConfig, TrainingDiverged, evaluate, train

logger = logging.getLogger(__name__)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphmrc",
        description="Two-branch graph transformer for multiple-choice logical reasoning",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="segment text and emit both graphs as JSON")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--text", help="text to parse")
    group.add_argument("--file", help="UTF-8 text file to parse")
    p.add_argument("--delta", type=float, default=0.5, help="co-occurrence threshold")
    p.add_argument("--lexicon", help="lexicon file merged over the defaults")

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--mode", choices=MODES, default="mixed")
    p.add_argument("--out", required=True, help="output JSON path")

    p = sub.add_parser("train", help="train a model")
    p.add_argument("--config", help="flat JSON config file")
    p.add_argument("--preset", choices=("toy", "full-scale"), default="toy")
    p.add_argument("--train", dest="train_path", required=True)
    p.add_argument("--valid", dest="valid_path", required=True)
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--format", default="native-json")
    p.add_argument("--lexicon", help="lexicon file merged over the defaults")
    p.add_argument("--max-seq-len", type=int, help="override the config's max sequence length")
    p.add_argument("--metrics-out", help="optional metrics JSON path")

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--params", required=True, help="checkpoint path")
    p.add_argument("--data", required=True)
    p.add_argument("--format", default="native-json")

    p = sub.add_parser("explain", help="export reasoning artifacts for one example")
    p.add_argument("--params", required=True, help="checkpoint path")
    p.add_argument("--example", required=True, help="JSON file with one record or a list")
    p.add_argument("--index", type=int, default=0, help="record index when a list is given")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--raw", action="store_true", help="skip min-max normalization in the bundle")
    return parser


def _cmd_parse(args) -> int:
    if args.text is not None:
        text = args.text
    else:
        path = Path(args.file)
        if not path.exists():
            raise ValueError(f"text file not found: {path}")
        text = path.read_text(encoding="utf-8")
    lexicon = load_lexicon(args.lexicon)
    parsed = parse_text(text, lexicon, args.delta)
    print(json.dumps(parsed.to_json(), indent=2, ensure_ascii=False))
    return 0


def _cmd_synth(args) -> int:
    records = generate_synthetic(args.seed, args.size, args.mode)
    save_dataset(records, args.out)
    logger.info("wrote %d records to %s", len(records), args.out)
    return 0


def _cmd_train(args) -> int:
    if args.config:
        config = TrainConfig.from_file(args.config)
    elif args.preset == "full-scale":
        config = TrainConfig.full_scale()
    else:
        config = TrainConfig()
    if args.max_seq_len:
        import dataclasses

        config = dataclasses.replace(config, max_seq_len=args.max_seq_len)
    train_records = load_dataset(args.train_path, args.format)
    valid_records = load_dataset(args.valid_path, args.format)
    lexicon = load_lexicon(args.lexicon)
    result = train(config, train_records, valid_records, lexicon=lexicon)
    result.model.save(args.out)
    summary = {
        "train_accuracy": result.train_metrics.accuracy,
        "train_loss_curve": list(result.train_metrics.losses),
        "valid_accuracy": result.valid_metrics.accuracy if result.valid_metrics else None,
        "valid_accuracy_curve": list(result.valid_accuracy_curve),
        "best_epoch": result.best_epoch,
        "checkpoint": args.out,
    }
    if args.metrics_out:
        Path(args.metrics_out).write_text(
            json.dumps(summary, indent=2, sort_keys=True), encoding="utf-8"
        )
    print(json.dumps(summary, indent=2))
    return 0


def _cmd_eval(args) -> int:
    model = TwoBranchModel.load(args.params)
    records = load_dataset(args.data, args.format)
    metrics = evaluate(model, records)
    print(json.dumps({"split": metrics.split, "accuracy": metrics.accuracy, "count": len(records)}))
    return 0


def _cmd_explain(args) -> int:
    model = TwoBranchModel.load(args.params)
    payload = json.loads(Path(args.example).read_text(encoding="utf-8"))
    if isinstance(payload, list):
        if not 0 <= args.index < len(payload):
            raise DatasetError(f"--index {args.index} outside the {len(payload)}-record file")
        payload = payload[args.index]
    record = validate_examples([payload])[0]
    bundle = export_explanation(model, record, args.out_dir, normalize=not args.raw)
    print(json.dumps({"out_dir": args.out_dir, "predicted": bundle["predicted"]}))
    return 0


_COMMANDS = {
    "parse": _cmd_parse,
    "synth": _cmd_synth,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "explain": _cmd_explain,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return _COMMANDS[args.command](args)
    except (DatasetError, LexiconError, InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (TrainingDiverged, OSError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
