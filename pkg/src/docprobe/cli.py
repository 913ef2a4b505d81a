"""Command-line interface.

Subcommands:
  build-tasks  build one probing-task dataset from a corpus and a bundle
  train        train a single probe on a saved dataset
  sweep        run a multi-cell experiment from a JSON spec (resumable)
  stratify     sweep with per-length-stratum evaluation (doc-level tasks)
  report       render CSV/markdown reports from a results directory
  compare      delta table between two single-bundle results directories

Exit codes: 0 success, 1 hard error, 2 completed with failed cells.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .corpus import parse_corpus
from .embedstore import read_bundle
from .probe import ProbeConfig, save_model, train
from .runner import (
    ExperimentSpec,
    compare_modes,
    load_results,
    render_report,
    run_experiment,
    stratified_eval,
)
from .taskgen import build_task, load_dataset, save_dataset


def _add_probe_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--nhid", type=int, default=400)
    parser.add_argument("--dropout", type=float, default=0.0)
    parser.add_argument("--batch", type=int, default=8)
    parser.add_argument("--max-epoch", type=int, default=1000)
    parser.add_argument("--tenacity", type=int, default=10)
    parser.add_argument("--lr", type=float, default=1e-3)
    parser.add_argument("--seed", type=int, default=0)


def _probe_config(args: argparse.Namespace) -> ProbeConfig:
    return ProbeConfig(
        nhid=args.nhid,
        dropout=args.dropout,
        batch_size=args.batch,
        max_epoch=args.max_epoch,
        tenacity=args.tenacity,
        learning_rate=args.lr,
        seed=args.seed,
    )


def _cmd_build_tasks(args: argparse.Namespace) -> int:
    corpus = parse_corpus(args.corpus, args.corpus_format)
    _, reader = read_bundle(args.bundle)
    dataset = build_task(args.task, corpus, reader, seed=args.seed)
    paths = save_dataset(dataset, args.out)
    sizes = {split: len(examples) for split, examples in dataset.splits.items()}
    print(
        f"wrote {args.task}: sizes={sizes} dropped={dataset.dropped_count} "
        f"skipped={dataset.skipped_count} -> {paths['manifest']}"
    )
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    dataset = load_dataset(args.dataset, args.task)
    _, reader = read_bundle(args.bundle)
    config = _probe_config(args)
    model, report = train(config, dataset, reader, args.layer)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_model(model, out / "model.dpm")
    report_obj = {
        "task": dataset.task,
        "layer": args.layer,
        "best_epoch": report.best_epoch,
        "dev_accuracy_curve": list(report.dev_accuracy_curve),
        "test_accuracy": report.test_accuracy,
        "stopped_reason": report.stopped_reason,
        "dropped": report.dropped,
        "config": dataclasses.asdict(config),
    }
    (out / "train_report.json").write_text(
        json.dumps(report_obj, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"test_accuracy {report.test_accuracy!r} (best_epoch={report.best_epoch}, {report.stopped_reason})")
    return 0


def _finish_sweep(table, out_dir: str) -> int:
    paths = render_report(table, "both", out_dir)
    for path in paths:
        print(f"wrote {path}")
    if table.failures:
        for f in table.failures:
            print(
                f"FAILED {f['task']}/{f['bundle']}/L{f['layer']}/s{f['seed']}: {f['error']}",
                file=sys.stderr,
            )
        return 2
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    spec = ExperimentSpec.from_json_file(args.spec)
    table = run_experiment(spec, workers=args.workers)
    return _finish_sweep(table, spec.output_dir)


def _cmd_stratify(args: argparse.Namespace) -> int:
    spec = ExperimentSpec.from_json_file(args.spec)
    if args.bounds:
        parts = tuple(int(x) for x in args.bounds.split(","))
        if len(parts) != 3:
            raise ValueError(f"--bounds needs three integers, got {args.bounds!r}")
        spec = dataclasses.replace(spec, strata=parts)
    table = stratified_eval(spec, workers=args.workers)
    return _finish_sweep(table, spec.output_dir)


def _cmd_report(args: argparse.Namespace) -> int:
    table = load_results(args.results)
    out_dir = args.out or args.results
    paths = render_report(table, args.format, out_dir)
    for path in paths:
        print(f"wrote {path}")
    return 2 if table.failures else 0


def _cmd_compare(args: argparse.Namespace) -> int:
    table_ft = load_results(args.fulltext)
    table_sc = load_results(args.sentcat)
    delta = compare_modes(table_ft, table_sc)
    paths = render_report(delta, args.format, args.out)
    for path in paths:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docprobe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-tasks", help="build one probing-task dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--corpus-format", default="muc-json", choices=["muc-json", "wikievents-json"])
    p.add_argument("--bundle", required=True)
    p.add_argument("--task", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_build_tasks)

    p = sub.add_parser("train", help="train a probe on a saved dataset")
    p.add_argument("--dataset", required=True, help="dataset dir or manifest path")
    p.add_argument("--task", default=None, help="task name when the dir holds several")
    p.add_argument("--bundle", required=True)
    p.add_argument("--layer", type=int, required=True)
    p.add_argument("--out", default="probe_out")
    _add_probe_flags(p)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("sweep", help="run a sweep from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("stratify", help="sweep with per-stratum evaluation")
    p.add_argument("--spec", required=True)
    p.add_argument("--bounds", default=None, help="e.g. 209,420,431")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=_cmd_stratify)

    p = sub.add_parser("report", help="render reports from cached cells")
    p.add_argument("--in", dest="results", required=True)
    p.add_argument("--format", required=True, choices=["csv", "markdown", "both"])
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_report)

    p = sub.add_parser("compare", help="SentCat minus FullText delta report")
    p.add_argument("--fulltext", required=True, help="results dir of the FullText sweep")
    p.add_argument("--sentcat", required=True, help="results dir of the SentCat sweep")
    p.add_argument("--format", default="both", choices=["csv", "markdown", "both"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_compare)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
