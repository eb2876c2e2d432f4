"""Turn a corpus into usage bundles, one directory per target word.

The bundle layout matches the analysis toolkit's contract exactly:
``meta.json`` + ``vectors.bin`` (float32 LE row-major) + ``labels.json`` +
``contexts.jsonl``. Rows appear in corpus order. Each bundle directory is
staged under a temporary name and moved into place in one rename.
"""

from __future__ import annotations

import json
import os
import shutil
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import CorpusSpec, tokenize, window_around
from .encoders import Encoder, build_encoder


@dataclass
class WordUsages:
    word: str
    vectors: list[np.ndarray] = field(default_factory=list)
    years: list[int] = field(default_factory=list)
    contexts: list[str] = field(default_factory=list)


def collect_usages(spec: CorpusSpec, encoder: Encoder) -> dict[str, WordUsages]:
    """Scan the corpus once and encode every occurrence of every target."""
    targets = set(spec.targets)
    collected = {word: WordUsages(word=word) for word in spec.targets}
    for text, year in spec.documents:
        tokens = tokenize(text)
        for position, token in enumerate(tokens):
            if token not in targets:
                continue
            window, offset = window_around(tokens, position, spec.window)
            vector = np.asarray(encoder.encode(window, offset), dtype=np.float32)
            usages = collected[token]
            usages.vectors.append(vector)
            usages.years.append(year)
            usages.contexts.append(" ".join(window))
    return collected


def write_bundle(usages: WordUsages, spec: CorpusSpec, dim: int, out_dir: Path) -> Path:
    intervals = sorted({spec.interval_of(y) for y in usages.years})
    label_index = {t: i for i, t in enumerate(intervals)}
    labels = [label_index[spec.interval_of(y)] for y in usages.years]
    n = len(usages.vectors)
    matrix = (
        np.stack(usages.vectors).astype("<f4")
        if n
        else np.zeros((0, dim), dtype="<f4")
    )

    final = out_dir / usages.word
    staging = out_dir / f".{usages.word}.tmp-{os.getpid()}"
    if staging.exists():
        shutil.rmtree(staging)
    staging.mkdir(parents=True)
    meta = {"word": usages.word, "dim": dim, "n_usages": n, "intervals": intervals}
    (staging / "meta.json").write_text(
        json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (staging / "vectors.bin").write_bytes(matrix.tobytes())
    (staging / "labels.json").write_text(json.dumps(labels) + "\n", encoding="utf-8")
    with (staging / "contexts.jsonl").open("w", encoding="utf-8") as fh:
        for i, context in enumerate(usages.contexts):
            record = {
                "id": i,
                "text": context,
                "interval": intervals[labels[i]],
            }
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
    if final.exists():
        shutil.rmtree(final)
    os.replace(staging, final)
    return final


def extract(spec: CorpusSpec, out_dir: str | Path, encoder: Encoder | None = None) -> list[Path]:
    """Extract usage bundles for every target word; returns bundle paths.

    Targets that never occur still produce a bundle (with zero usages) and a
    warning, so downstream tooling sees the full target list.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    documents = list(spec.documents)
    if encoder is None:
        vocabulary = sorted({t for text, _ in documents for t in tokenize(text)})
        encoder = build_encoder(spec.model, vocabulary)
    scan_spec = CorpusSpec(
        documents=documents,
        targets=spec.targets,
        interval_width=spec.interval_width,
        window=spec.window,
        model=spec.model,
    )
    collected = collect_usages(scan_spec, encoder)
    paths = []
    for word in scan_spec.targets:
        usages = collected[word]
        if not usages.vectors:
            warnings.warn(f"target {word!r} never occurs in the corpus; writing an empty bundle")
        paths.append(write_bundle(usages, scan_spec, encoder.hidden_size, out_dir))
    return paths


def validate_bundle_against_spec(
    bundle_dir: str | Path, spec: CorpusSpec, expected_dim: int | None = None
) -> dict:
    """Report-only consistency check of a written bundle against its spec.

    Lists per-interval usage counts, flags intervals in the corpus range
    with zero usages, and checks the vector dimensionality when given.
    Never raises for content findings; those go into ``issues``.
    """
    bundle_dir = Path(bundle_dir)
    meta = json.loads((bundle_dir / "meta.json").read_text(encoding="utf-8"))
    labels = json.loads((bundle_dir / "labels.json").read_text(encoding="utf-8"))
    issues: list[str] = []

    n_usages = meta["n_usages"]
    if len(labels) != n_usages:
        issues.append(f"labels length {len(labels)} != n_usages {n_usages}")
    raw = (bundle_dir / "vectors.bin").read_bytes()
    if len(raw) != 4 * n_usages * meta["dim"]:
        issues.append(f"vectors.bin has {len(raw)} bytes, expected {4 * n_usages * meta['dim']}")
    if expected_dim is not None and meta["dim"] != expected_dim:
        issues.append(f"dim {meta['dim']} != model hidden size {expected_dim}")

    per_interval = {int(t): 0 for t in meta["intervals"]}
    for label in labels:
        per_interval[meta["intervals"][label]] += 1
    covered_years = sorted({year for _, year in spec.documents})
    if covered_years:
        lo = spec.interval_of(covered_years[0])
        hi = spec.interval_of(covered_years[-1])
        expected = list(range(lo, hi + spec.interval_width, spec.interval_width))
        for t in expected:
            if per_interval.get(t, 0) == 0:
                issues.append(f"interval {t} has zero usages")
    if sum(per_interval.values()) != n_usages:
        issues.append("per-interval counts do not sum to n_usages")

    return {
        "word": meta["word"],
        "n_usages": n_usages,
        "dim": meta["dim"],
        "per_interval": per_interval,
        "issues": issues,
    }
