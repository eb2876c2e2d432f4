"""Command-line entry point: corpus directory in, bundle directories out."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .corpus import CorpusSpec, read_corpus_dir
from .extract import extract, validate_bundle_against_spec


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="usageshift-extract",
        description="Extract contextualised usage bundles from a year-labelled corpus.",
    )
    parser.add_argument("--corpus", help="directory of *.txt files named by year")
    parser.add_argument("--targets", help="comma-separated target words")
    parser.add_argument("--config", help="JSON file mirroring the corpus spec fields")
    parser.add_argument("--out", required=True)
    parser.add_argument("--interval-width", dest="interval_width", type=int, default=10)
    parser.add_argument("--window", type=int, default=128)
    parser.add_argument("--model", default="toy", help="'toy', 'toy:N' or 'hf:NAME'")
    parser.add_argument("--validate", action="store_true", help="print a per-word report")
    return parser


def spec_from_args(args: argparse.Namespace) -> CorpusSpec:
    settings = {
        "interval_width": args.interval_width,
        "window": args.window,
        "model": args.model,
    }
    corpus_dir = args.corpus
    targets = [t for t in (args.targets or "").split(",") if t.strip()]
    if args.config:
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        corpus_dir = doc.get("corpus", corpus_dir)
        targets = doc.get("targets", targets)
        for key in settings:
            if key in doc:
                settings[key] = doc[key]
    if not corpus_dir:
        raise ValueError("need --corpus (or a config file with a 'corpus' entry)")
    if not targets:
        raise ValueError("need --targets (or a config file with a 'targets' entry)")
    return CorpusSpec(documents=read_corpus_dir(corpus_dir), targets=targets, **settings)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        spec = spec_from_args(args)
        paths = extract(spec, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for path in paths:
        meta = json.loads((path / "meta.json").read_text(encoding="utf-8"))
        print(f"{meta['word']}\t{meta['n_usages']} usages\t{len(meta['intervals'])} intervals")
        if args.validate:
            report = validate_bundle_against_spec(path, spec)
            print(json.dumps(report, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
