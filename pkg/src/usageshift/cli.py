"""Command-line front end.

Subcommands: ``cluster``, ``change``, ``export``, ``eval gems|mantel|agreement``
and ``sample-pairs``. Machine-readable output goes to files, a short human
summary to stdout. Every output file embeds the run configuration, and two
runs with identical configuration produce byte-identical artifacts.

Exit codes: 0 success, 1 partial per-word failure, 2 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from . import evaluation, metrics, store, timeline
from .clustering import fit_usage_types, interval_distributions, load_model, save_model

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_CONFIG = 2


class ConfigError(Exception):
    pass


def _write_json(path: Path, doc: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def _write_jsonl(path: Path, docs: list[dict]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc, ensure_ascii=False, sort_keys=True) + "\n")


def _base_config(command: str, args: argparse.Namespace, keys: tuple[str, ...]) -> dict:
    config = {"tool": "usageshift", "version": __version__, "command": command}
    for key in keys:
        config[key] = getattr(args, key)
    return config


def _per_word(items: list, fn, jobs: int):
    """Run ``fn(item)`` per item, optionally in a thread pool.

    Returns (results sorted by word, failures as (name, error) pairs).
    """
    results, failures = [], []

    def run(item):
        name, payload = item
        try:
            return name, fn(payload), None
        except Exception as exc:  # per-word isolation: the run continues
            return name, None, exc

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run, items))
    else:
        outcomes = [run(item) for item in items]
    for name, value, error in outcomes:
        if error is None:
            results.append((name, value))
        else:
            failures.append((name, error))
    results.sort(key=lambda pair: pair[0])
    failures.sort(key=lambda pair: pair[0])
    return results, failures


def _report_failures(failures) -> None:
    for name, error in failures:
        print(f"error: {name}: {error}", file=sys.stderr)


def _load_bundles(bundles_dir: str, word: str | None = None):
    root = Path(bundles_dir)
    if not root.is_dir():
        raise ConfigError(f"bundle directory {root} does not exist")
    dirs = store.iter_bundle_dirs(root)
    if word is not None:
        dirs = [d for d in dirs if d.name == word]
        if not dirs:
            raise ConfigError(f"no bundle directory for word {word!r} under {root}")
    if not dirs:
        raise ConfigError(f"no bundle directories under {root}")
    return dirs


# ---------------------------------------------------------------------------
# cluster
# ---------------------------------------------------------------------------

def cmd_cluster(args: argparse.Namespace) -> int:
    if not (2 <= args.k_min <= args.k_max):
        raise ConfigError(f"need 2 <= k_min <= k_max, got [{args.k_min}, {args.k_max}]")
    config = _base_config(
        "cluster", args, ("seed", "k_min", "k_max", "restarts", "max_iters", "monosemy_threshold")
    )
    out = Path(args.out)

    def fit_one(bundle_dir: Path):
        bundle = store.load_bundle(bundle_dir)
        model = fit_usage_types(
            bundle,
            k_min=args.k_min,
            k_max=args.k_max,
            seed=args.seed,
            restarts=args.restarts,
            max_iters=args.max_iters,
            monosemy_threshold=args.monosemy_threshold,
        )
        save_model(model, out / bundle.word, config=config)
        return {
            "word": bundle.word,
            "n": bundle.n_usages,
            "k": model.k,
            "silhouette": None if np.isnan(model.silhouette) else model.silhouette,
        }

    dirs = _load_bundles(args.bundles)
    results, failures = _per_word([(d.name, d) for d in dirs], fit_one, args.jobs)

    rows = [row for _, row in results]
    out.mkdir(parents=True, exist_ok=True)
    summary_lines = [
        "# config: " + json.dumps(config, sort_keys=True, separators=(",", ":")),
        "word\tn\tk\tsilhouette",
    ]
    for row in rows:
        sil = "" if row["silhouette"] is None else repr(row["silhouette"])
        summary_lines.append(f"{row['word']}\t{row['n']}\t{row['k']}\t{sil}")
    (out / "summary.tsv").write_text("\n".join(summary_lines) + "\n", encoding="utf-8")
    _write_json(out / "summary.json", {"config": config, "words": rows})

    for line in summary_lines[1:]:  # the config comment is file-only
        print(line)
    _report_failures(failures)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# change
# ---------------------------------------------------------------------------

def _parse_intervals(raw: str | None) -> list[int] | None:
    if raw is None:
        return None
    try:
        return [int(part) for part in raw.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"--intervals must be comma-separated integers, got {raw!r}")


def cmd_change(args: argparse.Namespace) -> int:
    intervals = _parse_intervals(args.intervals)
    needs_model = args.metric in ("ed", "jsd", "jsd-multi")
    if needs_model and args.models is None:
        raise ConfigError(
            f"metric {args.metric!r} needs usage-type models; run `usageshift cluster` "
            "first and pass --models"
        )
    totals = None
    if args.metric == "freq":
        if args.totals is None:
            raise ConfigError("metric 'freq' needs --totals (JSON mapping interval -> corpus size)")
        try:
            raw = json.loads(Path(args.totals).read_text(encoding="utf-8"))
            totals = {int(t): int(c) for t, c in raw.items()}
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read totals file {args.totals}: {exc}")

    config = _base_config("change", args, ("metric", "distance", "agg", "seed"))
    config["intervals"] = intervals

    def score_one(bundle_dir: Path) -> dict:
        bundle = store.load_bundle(bundle_dir)
        model = None
        if needs_model:
            model_dir = Path(args.models) / bundle.word
            if not (model_dir / "model.json").exists():
                raise ValueError(
                    f"no model for {bundle.word!r} under {args.models}; run `usageshift cluster`"
                )
            model = load_model(model_dir)
        if args.metric in ("ed", "jsd", "apd"):
            series = metrics.change_series(
                bundle,
                model,
                metric=args.metric,
                distance=args.distance,
                intervals=intervals,
                printed_jsd=args.printed_jsd,
            )
            doc = series.to_dict()
            doc["aggregation"] = args.agg
            doc["score"] = series.aggregate(args.agg)
        elif args.metric == "jsd-multi":
            value, used, empty = metrics.jsd_multi_series(bundle, model, intervals=intervals)
            doc = {
                "word": bundle.word,
                "metric": "jsd_multi",
                "intervals": used,
                "empty_intervals": empty,
                "score": value,
            }
        else:  # freq
            considered = intervals if intervals is not None else bundle.intervals
            first, last = considered[0], considered[-1]
            for t in (first, last):
                if t not in totals:
                    raise ValueError(f"totals file lacks interval {t}")
            count_first = int(store.slice_by_interval(bundle, first).shape[0])
            count_last = int(store.slice_by_interval(bundle, last).shape[0])
            doc = {
                "word": bundle.word,
                "metric": "freq",
                "intervals": [first, last],
                "counts": [count_first, count_last],
                "totals": [totals[first], totals[last]],
                "score": metrics.frequency_baseline(
                    count_first, totals[first], count_last, totals[last]
                ),
            }
        doc["config"] = config
        return doc

    dirs = _load_bundles(args.bundles)
    results, failures = _per_word([(d.name, d) for d in dirs], score_one, args.jobs)
    docs = [doc for _, doc in results]
    _write_jsonl(Path(args.out), docs)
    for doc in docs:
        print(f"{doc['word']}\t{doc['metric']}\t{doc['score']!r}")
    _report_failures(failures)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# export
# ---------------------------------------------------------------------------

def cmd_export(args: argparse.Namespace) -> int:
    bundle_dir = _load_bundles(args.bundles, word=args.word)[0]
    bundle = store.load_bundle(bundle_dir)
    model_dir = Path(args.models) / args.word
    if not (model_dir / "model.json").exists():
        raise ConfigError(f"no model for {args.word!r} under {args.models}")
    model = load_model(model_dir)
    config = _base_config("export", args, ("word", "format"))
    config["seed"] = model.seed
    config["k"] = model.k
    text = timeline.export_timeline(bundle, model, args.format, config)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text, encoding="utf-8")
    dists = interval_distributions(bundle, model)
    print(f"{args.word}: k={model.k}, {len(dists)} intervals -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# eval
# ---------------------------------------------------------------------------

def _load_scores_file(path: str, metric: str | None) -> dict[str, float]:
    scores: dict[str, float] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read scores file {path}: {exc}")
    for line in lines:
        if not line.strip():
            continue
        doc = json.loads(line)
        if metric is not None and doc.get("metric") != metric:
            continue
        word = doc["word"]
        if word in scores:
            raise ConfigError(
                f"multiple score records for {word!r}; filter with --metric"
            )
        scores[word] = float(doc["score"])
    if not scores:
        raise ConfigError(f"no usable score records in {path}")
    return scores


def cmd_eval_gems(args: argparse.Namespace) -> int:
    scores = _load_scores_file(args.scores, args.metric)
    gold = store.load_gold_scores(args.gold)
    rho, p, n = evaluation.evaluate_gems(scores, gold)
    config = _base_config("eval-gems", args, ("metric",))
    report = {"task": "gems", "rho": rho, "p": p, "n": n, "config": config}
    if args.out:
        _write_json(Path(args.out), report)
    print(f"gems: rho={rho:.6f} p={p:.6g} n={n}")
    return EXIT_OK


def _matrix_from_file(path: str) -> evaluation.SimilarityMatrix:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    values = np.asarray(doc["values"], dtype=np.float64)
    return evaluation.SimilarityMatrix(
        word=doc.get("word", ""), n=values.shape[0], values=values
    )


def cmd_eval_mantel(args: argparse.Namespace) -> int:
    config = _base_config("eval-mantel", args, ("permutations", "seed"))
    reports = []
    if args.matrix_a and args.matrix_b:
        a = _matrix_from_file(args.matrix_a)
        b = _matrix_from_file(args.matrix_b)
        rho, p = evaluation.mantel_test(a, b, permutations=args.permutations, seed=args.seed)
        reports.append(
            {
                "task": "mantel",
                "word": a.word or b.word,
                "rho": rho,
                "p": p,
                "n": a.n,
                "permutations": args.permutations,
                "seed": args.seed,
                "config": config,
            }
        )
    elif args.judgements and args.usages and args.bundles:
        judgement_sets = store.load_judgements(args.judgements, args.usages)
        words = [args.word] if args.word else sorted(judgement_sets)
        for word in words:
            if word not in judgement_sets:
                raise ConfigError(f"word {word!r} not present in {args.judgements}")
            js = judgement_sets[word]
            human = evaluation.average_judgements(js)
            bundle = store.load_bundle(_load_bundles(args.bundles, word=word)[0])
            ids = sorted(js.usages)
            bad = [u for u in ids if u >= bundle.n_usages]
            if bad:
                raise ConfigError(f"usage ids {bad} outside bundle for {word!r}")
            machine = evaluation.model_similarity_matrix(bundle.vectors[ids], word=word)
            rho, p = evaluation.mantel_test(
                human, machine, permutations=args.permutations, seed=args.seed
            )
            reports.append(
                {
                    "task": "mantel",
                    "word": word,
                    "rho": rho,
                    "p": p,
                    "n": human.n,
                    "permutations": args.permutations,
                    "seed": args.seed,
                    "config": config,
                }
            )
    else:
        raise ConfigError(
            "eval mantel needs either --matrix-a/--matrix-b or --judgements/--usages/--bundles"
        )
    if args.out:
        _write_jsonl(Path(args.out), reports)
    for rep in reports:
        print(f"mantel {rep['word']}: rho={rep['rho']:.6f} p={rep['p']:.6g} n={rep['n']}")
    return EXIT_OK


def cmd_eval_agreement(args: argparse.Namespace) -> int:
    judgement_sets = store.load_judgements(args.judgements, args.usages)
    sets = list(judgement_sets.values())
    rho = evaluation.annotator_agreement(sets)
    n_items = sum(len(js.pairs) for js in sets)
    config = _base_config("eval-agreement", args, ())
    report = {"task": "agreement", "rho": rho, "n": n_items, "config": config}
    if args.out:
        _write_json(Path(args.out), report)
    print(f"agreement: rho={rho:.6f} over {n_items} rated pairs")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sample-pairs
# ---------------------------------------------------------------------------

def cmd_sample_pairs(args: argparse.Namespace) -> int:
    config = _base_config(
        "sample-pairs", args, ("seed", "usages_per_type", "period_years")
    )
    out = Path(args.out)

    def sample_one(bundle_dir: Path) -> dict:
        bundle = store.load_bundle(bundle_dir)
        model_dir = Path(args.models) / bundle.word
        if not (model_dir / "model.json").exists():
            raise ValueError(f"no model for {bundle.word!r} under {args.models}")
        model = load_model(model_dir)
        pairs = evaluation.sample_annotation_pairs(
            bundle,
            model,
            usages_per_type=args.usages_per_type,
            period_years=args.period_years,
            seed=args.seed,
        )
        word_dir = out / bundle.word
        _write_jsonl(
            word_dir / "pairs.jsonl",
            [{"word": bundle.word, "a": a, "b": b} for a, b in pairs],
        )
        labels = bundle.interval_labels()
        ids = sorted({u for pair in pairs for u in pair})
        _write_jsonl(
            word_dir / "usages.jsonl",
            [
                {
                    "id": u,
                    "text": bundle.contexts[u],
                    "interval": int(labels[u]),
                    "usage_type": int(model.assignments[u]),
                }
                for u in ids
            ],
        )
        _write_json(word_dir / "config.json", {"config": config})
        return {"word": bundle.word, "pairs": len(pairs), "usages": len(ids)}

    dirs = _load_bundles(args.bundles, word=args.word)
    results, failures = _per_word([(d.name, d) for d in dirs], sample_one, args.jobs)
    for _, row in results:
        print(f"{row['word']}\t{row['usages']} usages\t{row['pairs']} pairs")
    _report_failures(failures)
    return EXIT_PARTIAL if failures else EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="usageshift",
        description="Induce word usage types and quantify lexical semantic change.",
    )
    parser.add_argument("--version", action="version", version=f"usageshift {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_cluster = sub.add_parser("cluster", help="fit usage-type models for every bundle")
    p_cluster.add_argument("--bundles", required=True)
    p_cluster.add_argument("--out", required=True)
    p_cluster.add_argument("--k-min", dest="k_min", type=int, default=2)
    p_cluster.add_argument("--k-max", dest="k_max", type=int, default=10)
    p_cluster.add_argument("--restarts", type=int, default=10)
    p_cluster.add_argument("--seed", type=int, default=42)
    p_cluster.add_argument("--max-iters", dest="max_iters", type=int, default=300)
    p_cluster.add_argument(
        "--monosemy-threshold",
        dest="monosemy_threshold",
        type=float,
        default=None,
        help="mean distance to the global centroid below which a word is "
        "treated as having a single usage type (disabled by default)",
    )
    p_cluster.add_argument("--jobs", type=int, default=1)
    p_cluster.set_defaults(func=cmd_cluster)

    p_change = sub.add_parser("change", help="score semantic change per word")
    p_change.add_argument("--bundles", required=True)
    p_change.add_argument("--models", default=None)
    p_change.add_argument("--out", required=True)
    p_change.add_argument(
        "--metric", required=True, choices=["ed", "jsd", "apd", "jsd-multi", "freq"]
    )
    p_change.add_argument("--distance", choices=list(metrics.DISTANCES), default="euclidean")
    p_change.add_argument("--agg", choices=["mean", "max"], default="max")
    p_change.add_argument("--intervals", default=None, help="comma-separated interval labels")
    p_change.add_argument("--totals", default=None, help="JSON mapping interval -> corpus size")
    p_change.add_argument("--printed-jsd", dest="printed_jsd", action="store_true")
    p_change.add_argument("--seed", type=int, default=42)
    p_change.add_argument("--jobs", type=int, default=1)
    p_change.set_defaults(func=cmd_change)

    p_export = sub.add_parser("export", help="export a word's usage-type timeline")
    p_export.add_argument("--bundles", required=True)
    p_export.add_argument("--models", required=True)
    p_export.add_argument("--word", required=True)
    p_export.add_argument("--format", required=True, choices=["csv", "json", "svg"])
    p_export.add_argument("--out", required=True)
    p_export.set_defaults(func=cmd_export)

    p_eval = sub.add_parser("eval", help="correlate scores with human data")
    eval_sub = p_eval.add_subparsers(dest="eval_command", required=True)

    p_gems = eval_sub.add_parser("gems", help="Spearman correlation against gold shift scores")
    p_gems.add_argument("--scores", required=True, help="scores JSONL from `usageshift change`")
    p_gems.add_argument("--gold", required=True, help="TSV: word<TAB>score")
    p_gems.add_argument("--metric", default=None, help="filter score records by metric")
    p_gems.add_argument("--out", default=None)
    p_gems.set_defaults(func=cmd_eval_gems)

    p_mantel = eval_sub.add_parser("mantel", help="Mantel test between similarity matrices")
    p_mantel.add_argument("--matrix-a", dest="matrix_a", default=None)
    p_mantel.add_argument("--matrix-b", dest="matrix_b", default=None)
    p_mantel.add_argument("--judgements", default=None)
    p_mantel.add_argument("--usages", default=None)
    p_mantel.add_argument("--bundles", default=None)
    p_mantel.add_argument("--word", default=None)
    p_mantel.add_argument("--permutations", type=int, default=9999)
    p_mantel.add_argument("--seed", type=int, default=42)
    p_mantel.add_argument("--out", default=None)
    p_mantel.set_defaults(func=cmd_eval_mantel)

    p_agree = eval_sub.add_parser("agreement", help="mean pairwise annotator correlation")
    p_agree.add_argument("--judgements", required=True)
    p_agree.add_argument("--usages", default=None)
    p_agree.add_argument("--out", default=None)
    p_agree.set_defaults(func=cmd_eval_agreement)

    p_sample = sub.add_parser("sample-pairs", help="sample usage pairs for annotation")
    p_sample.add_argument("--bundles", required=True)
    p_sample.add_argument("--models", required=True)
    p_sample.add_argument("--out", required=True)
    p_sample.add_argument("--word", default=None)
    p_sample.add_argument("--usages-per-type", dest="usages_per_type", type=int, default=5)
    p_sample.add_argument("--period-years", dest="period_years", type=int, default=20)
    p_sample.add_argument("--seed", type=int, default=42)
    p_sample.add_argument("--jobs", type=int, default=1)
    p_sample.set_defaults(func=cmd_sample_pairs)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, store.BundleError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
