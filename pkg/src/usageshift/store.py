"""Data model and bit-exact on-disk formats for usage bundles, gold scores,
and human similarity judgements.

A bundle directory holds ``meta.json``, ``vectors.bin`` (float32
little-endian, row-major, no header), ``labels.json`` and an optional
``contexts.jsonl``. Bundles are immutable after load and safe to share
read-only across threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

META_FILE = "meta.json"
VECTORS_FILE = "vectors.bin"
LABELS_FILE = "labels.json"
CONTEXTS_FILE = "contexts.jsonl"

FLOAT_DTYPE = np.dtype("<f4")


class BundleError(Exception):
    """Base class for bundle validation failures.

    Carries the offending file and, where meaningful, a byte or record
    offset into it.
    """

    def __init__(self, message: str, path: Path | str | None = None, offset: int | None = None):
        loc = ""
        if path is not None:
            loc = f" [{path}" + (f", offset {offset}" if offset is not None else "") + "]"
        super().__init__(message + loc)
        self.path = Path(path) if path is not None else None
        self.offset = offset


class MalformedFileError(BundleError):
    """File is unreadable, not valid JSON, or violates the schema."""


class SizeMismatchError(BundleError):
    """A binary payload has the wrong byte length."""


class DimensionMismatchError(BundleError):
    """Array lengths disagree with the declared shape."""


class LabelRangeError(BundleError):
    """An interval index points outside the interval list."""


class NonFiniteError(BundleError):
    """A vector entry is NaN or infinite."""


class UnknownIntervalError(ValueError):
    """Requested interval label is not part of the bundle."""


@dataclass(eq=False)
class UsageBundle:
    """All usage vectors of one word with their time-interval labels.

    ``vectors`` is the N x dim usage matrix (float32), ``interval_index[i]``
    indexes into ``intervals`` and gives the time interval of usage ``i``.
    ``contexts`` optionally holds one text snippet per usage.
    """

    word: str
    dim: int
    n_usages: int
    intervals: list[int]
    vectors: np.ndarray
    interval_index: np.ndarray
    contexts: list[str] | None = None

    def __post_init__(self):
        self.vectors = np.ascontiguousarray(self.vectors, dtype=FLOAT_DTYPE).reshape(
            self.n_usages, self.dim
        )
        self.interval_index = np.ascontiguousarray(self.interval_index, dtype=np.int64)
        self.intervals = [int(t) for t in self.intervals]
        self.validate()

    def validate(self) -> None:
        if not self.word:
            raise MalformedFileError("bundle word must be non-empty")
        if self.dim <= 0:
            raise MalformedFileError(f"dim must be positive, got {self.dim}")
        if self.n_usages < 0:
            raise MalformedFileError(f"n_usages must be non-negative, got {self.n_usages}")
        if any(b <= a for a, b in zip(self.intervals, self.intervals[1:])):
            raise MalformedFileError(f"intervals must be strictly increasing: {self.intervals}")
        if self.vectors.shape != (self.n_usages, self.dim):
            raise DimensionMismatchError(
                f"vectors shape {self.vectors.shape} != ({self.n_usages}, {self.dim})"
            )
        if self.interval_index.shape != (self.n_usages,):
            raise DimensionMismatchError(
                f"expected {self.n_usages} labels, got {self.interval_index.shape[0]}"
            )
        if self.n_usages:
            bad = np.flatnonzero(~np.isfinite(self.vectors).all(axis=1))
            if bad.size:
                raise NonFiniteError(f"non-finite vector entry in row {bad[0]}", offset=int(bad[0]))
            if self.interval_index.min() < 0 or self.interval_index.max() >= len(self.intervals):
                bad_i = int(
                    np.flatnonzero(
                        (self.interval_index < 0) | (self.interval_index >= len(self.intervals))
                    )[0]
                )
                raise LabelRangeError(
                    f"label {int(self.interval_index[bad_i])} out of range for "
                    f"{len(self.intervals)} intervals",
                    offset=bad_i,
                )
        if self.contexts is not None and len(self.contexts) != self.n_usages:
            raise DimensionMismatchError(
                f"expected {self.n_usages} contexts, got {len(self.contexts)}"
            )

    def __eq__(self, other) -> bool:
        if not isinstance(other, UsageBundle):
            return NotImplemented
        return (
            self.word == other.word
            and self.dim == other.dim
            and self.n_usages == other.n_usages
            and self.intervals == other.intervals
            and self.vectors.tobytes() == other.vectors.tobytes()
            and self.interval_index.tolist() == other.interval_index.tolist()
            and self.contexts == other.contexts
        )

    def interval_labels(self) -> np.ndarray:
        """Per-usage interval label (not index)."""
        return np.asarray(self.intervals, dtype=np.int64)[self.interval_index]


def save_bundle(bundle: UsageBundle, path: str | Path) -> None:
    """Persist ``bundle`` so that :func:`load_bundle` restores it bit-exactly."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "word": bundle.word,
        "dim": bundle.dim,
        "n_usages": bundle.n_usages,
        "intervals": bundle.intervals,
    }
    (path / META_FILE).write_text(
        json.dumps(meta, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (path / VECTORS_FILE).write_bytes(bundle.vectors.astype(FLOAT_DTYPE, copy=False).tobytes())
    (path / LABELS_FILE).write_text(
        json.dumps(bundle.interval_index.tolist()) + "\n", encoding="utf-8"
    )
    ctx_path = path / CONTEXTS_FILE
    if bundle.contexts is None:
        if ctx_path.exists():
            ctx_path.unlink()
    else:
        labels = bundle.interval_labels()
        with ctx_path.open("w", encoding="utf-8") as fh:
            for i, text in enumerate(bundle.contexts):
                record = {"id": i, "text": text, "interval": int(labels[i])}
                fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise MalformedFileError("missing file", path=path)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedFileError(f"invalid JSON: {exc}", path=path)


def load_bundle(path: str | Path) -> UsageBundle:
    """Load and validate a bundle directory.

    Raises a distinct :class:`BundleError` subclass per failure mode, each
    naming the offending file and offset.
    """
    path = Path(path)
    meta_path = path / META_FILE
    meta = _read_json(meta_path)
    if not isinstance(meta, dict):
        raise MalformedFileError("meta.json must be a JSON object", path=meta_path)
    try:
        word = meta["word"]
        dim = meta["dim"]
        n_usages = meta["n_usages"]
        intervals = meta["intervals"]
    except KeyError as exc:
        raise MalformedFileError(f"meta.json missing key {exc}", path=meta_path)
    if (
        not isinstance(word, str)
        or not isinstance(dim, int)
        or not isinstance(n_usages, int)
        or not isinstance(intervals, list)
        or not all(isinstance(t, int) for t in intervals)
    ):
        raise MalformedFileError("meta.json fields have wrong types", path=meta_path)
    if dim <= 0 or n_usages < 0:
        raise MalformedFileError(f"invalid dim={dim} or n_usages={n_usages}", path=meta_path)
    if any(b <= a for a, b in zip(intervals, intervals[1:])):
        raise MalformedFileError("intervals must be strictly increasing", path=meta_path)

    vec_path = path / VECTORS_FILE
    try:
        raw = vec_path.read_bytes()
    except FileNotFoundError:
        raise MalformedFileError("missing file", path=vec_path)
    expected = 4 * n_usages * dim
    if len(raw) != expected:
        raise SizeMismatchError(
            f"expected {expected} bytes ({n_usages} x {dim} float32), got {len(raw)}",
            path=vec_path,
        )
    vectors = np.frombuffer(raw, dtype=FLOAT_DTYPE).reshape(n_usages, dim)
    if n_usages:
        finite = np.isfinite(vectors)
        if not finite.all():
            flat = int(np.flatnonzero(~finite.ravel())[0])
            raise NonFiniteError(
                f"non-finite value at row {flat // dim}, column {flat % dim}",
                path=vec_path,
                offset=4 * flat,
            )

    labels_path = path / LABELS_FILE
    labels = _read_json(labels_path)
    if not isinstance(labels, list) or not all(isinstance(x, int) for x in labels):
        raise MalformedFileError("labels.json must be a JSON array of integers", path=labels_path)
    if len(labels) != n_usages:
        raise DimensionMismatchError(
            f"expected {n_usages} labels, got {len(labels)}", path=labels_path
        )
    for i, lab in enumerate(labels):
        if lab < 0 or lab >= len(intervals):
            raise LabelRangeError(
                f"label {lab} out of range for {len(intervals)} intervals",
                path=labels_path,
                offset=i,
            )

    contexts = None
    ctx_path = path / CONTEXTS_FILE
    if ctx_path.exists():
        contexts = [None] * n_usages
        with ctx_path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedFileError(f"invalid JSON: {exc}", path=ctx_path, offset=lineno)
                if not isinstance(record, dict) or "id" not in record or "text" not in record:
                    raise MalformedFileError("context record needs id and text", path=ctx_path, offset=lineno)
                uid = record["id"]
                if not isinstance(uid, int) or uid < 0 or uid >= n_usages:
                    raise LabelRangeError(f"context id {uid} out of range", path=ctx_path, offset=lineno)
                if contexts[uid] is not None:
                    raise MalformedFileError(f"duplicate context id {uid}", path=ctx_path, offset=lineno)
                if "interval" in record and record["interval"] != intervals[labels[uid]]:
                    raise MalformedFileError(
                        f"context interval {record['interval']} disagrees with label "
                        f"{intervals[labels[uid]]} for usage {uid}",
                        path=ctx_path,
                        offset=lineno,
                    )
                contexts[uid] = record["text"]
        missing = [i for i, c in enumerate(contexts) if c is None]
        if missing:
            raise DimensionMismatchError(
                f"missing context for usage {missing[0]}", path=ctx_path, offset=missing[0]
            )

    return UsageBundle(
        word=word,
        dim=dim,
        n_usages=n_usages,
        intervals=intervals,
        vectors=vectors,
        interval_index=np.asarray(labels, dtype=np.int64),
        contexts=contexts,
    )


def slice_by_interval(bundle: UsageBundle, t: int) -> np.ndarray:
    """Rows of the usage matrix whose usages fall in interval ``t``, in order.

    Returns a 0 x dim matrix when no usage falls in ``t``; downstream metrics
    decide whether that is an error.
    """
    if t not in bundle.intervals:
        raise UnknownIntervalError(f"interval {t} not in bundle intervals {bundle.intervals}")
    idx = bundle.intervals.index(t)
    return bundle.vectors[bundle.interval_index == idx]


def iter_bundle_dirs(root: str | Path) -> list[Path]:
    """Sub-directories of ``root`` that look like bundles, sorted by name."""
    root = Path(root)
    return sorted(p for p in root.iterdir() if p.is_dir() and (p / META_FILE).exists())


# ---------------------------------------------------------------------------
# gold shift scores
# ---------------------------------------------------------------------------

@dataclass
class GoldScores:
    """Human-rated shift score per word."""

    entries: dict[str, float]


def load_gold_scores(path: str | Path) -> GoldScores:
    """Read a headerless UTF-8 TSV of ``word<TAB>score`` lines."""
    path = Path(path)
    entries: dict[str, float] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise MalformedFileError(
                    f"expected 'word<TAB>score', got {line!r}", path=path, offset=lineno
                )
            word, raw = parts
            try:
                score = float(raw)
            except ValueError:
                raise MalformedFileError(f"bad score {raw!r}", path=path, offset=lineno)
            if not math.isfinite(score):
                raise MalformedFileError(f"non-finite score for {word!r}", path=path, offset=lineno)
            if word in entries:
                raise MalformedFileError(f"duplicate word {word!r}", path=path, offset=lineno)
            entries[word] = score
    return GoldScores(entries=entries)


def save_gold_scores(gold: GoldScores, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for word, score in gold.entries.items():
            fh.write(f"{word}\t{score!r}\n")


# ---------------------------------------------------------------------------
# human similarity judgements
# ---------------------------------------------------------------------------

@dataclass
class JudgedUsage:
    text: str
    interval: int
    usage_type: int


@dataclass
class JudgementSet:
    """Rated usage pairs for one word on the 1-4 relatedness scale."""

    word: str
    pairs: list[tuple[int, int, list[int]]]
    usages: dict[int, JudgedUsage] = field(default_factory=dict)

    def validate(self) -> None:
        for a, b, ratings in self.pairs:
            if not ratings:
                raise MalformedFileError(f"pair ({a}, {b}) of {self.word!r} has no ratings")
            if any(not isinstance(r, int) or r < 1 or r > 4 for r in ratings):
                raise MalformedFileError(
                    f"pair ({a}, {b}) of {self.word!r} has ratings off the 1-4 scale: {ratings}"
                )
            if self.usages and (a not in self.usages or b not in self.usages):
                raise MalformedFileError(
                    f"pair ({a}, {b}) of {self.word!r} references unknown usage ids"
                )


def load_judgements(pairs_path: str | Path, usages_path: str | Path | None = None) -> dict[str, JudgementSet]:
    """Load rated pairs (JSON Lines) plus the optional companion usages file.

    Returns one :class:`JudgementSet` per word found in the pairs file.
    """
    pairs_path = Path(pairs_path)
    by_word: dict[str, list[tuple[int, int, list[int]]]] = {}
    with pairs_path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedFileError(f"invalid JSON: {exc}", path=pairs_path, offset=lineno)
            try:
                word, a, b, ratings = rec["word"], rec["a"], rec["b"], rec["ratings"]
            except (TypeError, KeyError):
                raise MalformedFileError(
                    "pair record needs word, a, b, ratings", path=pairs_path, offset=lineno
                )
            by_word.setdefault(word, []).append((int(a), int(b), list(ratings)))

    usages: dict[int, JudgedUsage] = {}
    if usages_path is not None:
        usages_path = Path(usages_path)
        with usages_path.open("r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise MalformedFileError(f"invalid JSON: {exc}", path=usages_path, offset=lineno)
                try:
                    usage = JudgedUsage(
                        text=rec["text"],
                        interval=int(rec["interval"]),
                        usage_type=int(rec["usage_type"]),
                    )
                except (TypeError, KeyError):
                    raise MalformedFileError(
                        "usage record needs id, text, interval, usage_type",
                        path=usages_path,
                        offset=lineno,
                    )
                uid = int(rec["id"])
                if uid in usages:
                    raise MalformedFileError(f"duplicate usage id {uid}", path=usages_path, offset=lineno)
                usages[uid] = usage

    sets: dict[str, JudgementSet] = {}
    for word, pairs in sorted(by_word.items()):
        referenced = {u for a, b, _ in pairs for u in (a, b)}
        scoped = {u: usages[u] for u in referenced if u in usages} if usages else {}
        if usages and len(scoped) != len(referenced):
            missing = sorted(referenced - set(scoped))
            raise MalformedFileError(
                f"usage ids {missing} of {word!r} missing from usages file", path=pairs_path
            )
        js = JudgementSet(word=word, pairs=pairs, usages=scoped)
        js.validate()
        sets[word] = js
    return sets
