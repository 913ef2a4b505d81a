"""Command-line entry point for dumping encoder hidden states.

    docprobe-extract --corpus muc.json --encoder bert-base-uncased \
        --mode fulltext --layers all --max-tokens 512 --out bundles/bert-ft

Writes one embedding bundle readable by the probing harness. Exit codes:
0 success, 1 failure (bad encoder, unreadable corpus, alignment violations
under --verify), 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionJob, extract, verify_alignment

_MODE_NAMES = {"fulltext": "FullText", "sentcat": "SentCat"}


def _parse_layers(text: str) -> tuple[int, ...] | str:
    if text == "all":
        return "all"
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"layers must be 'all' or comma-separated ints, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="docprobe-extract",
        description="Dump per-token transformer hidden states into an embedding bundle.",
    )
    parser.add_argument("--corpus", required=True, help="corpus file to encode")
    parser.add_argument("--corpus-format", default="muc-json", help="corpus format (default muc-json)")
    parser.add_argument("--encoder", required=True, help="pretrained model name or local path")
    parser.add_argument("--mode", required=True, choices=sorted(_MODE_NAMES),
                        help="fulltext: one forward pass per document; sentcat: per-sentence passes, concatenated")
    parser.add_argument("--layers", type=_parse_layers, default="all",
                        help="'all' or comma-separated layer indices, 0 = embedding layer (default all)")
    parser.add_argument("--max-tokens", type=int, default=512,
                        help="token budget per forward pass (default 512)")
    parser.add_argument("--out", required=True, help="bundle directory to write")
    parser.add_argument("--device", default="cpu", help="torch device (default cpu)")
    parser.add_argument("--verify", action="store_true",
                        help="re-read the bundle and check word-token alignment against the corpus")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job = ExtractionJob(
        corpus_path=args.corpus,
        encoder=args.encoder,
        mode=_MODE_NAMES[args.mode],
        layers=args.layers,
        max_tokens=args.max_tokens,
        out_dir=args.out,
        corpus_format=args.corpus_format,
        device=args.device,
    )
    try:
        out = extract(job)
        print(f"wrote {out}")
        if args.verify:
            from docprobe import parse_corpus

            report = verify_alignment(out, parse_corpus(args.corpus, args.corpus_format))
            print(
                f"verified {report.n_docs} docs, {report.n_words} words, "
                f"{report.total_lost} lost to truncation, {len(report.violations)} violations"
            )
            for line in report.violations:
                print(f"  {line}", file=sys.stderr)
            if not report.ok:
                return 1
    except Exception as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
