"""Shared builders for synthetic bundles and planted-cluster data."""

from __future__ import annotations

import numpy as np
import pytest

from usageshift.store import UsageBundle


def make_bundle(
    word: str = "word",
    dim: int = 4,
    intervals: list[int] | None = None,
    rows: list[tuple[int, np.ndarray]] | None = None,
    contexts: list[str] | None = None,
) -> UsageBundle:
    """Bundle from explicit (interval_index, vector) rows."""
    intervals = intervals if intervals is not None else [1960, 1970]
    rows = rows if rows is not None else []
    vectors = np.array([v for _, v in rows], dtype=np.float32).reshape(len(rows), dim)
    return UsageBundle(
        word=word,
        dim=dim,
        n_usages=len(rows),
        intervals=intervals,
        vectors=vectors,
        interval_index=np.array([t for t, _ in rows], dtype=np.int64),
        contexts=contexts,
    )


def random_bundle(
    rng: np.random.Generator,
    word: str = "word",
    dim: int = 4,
    n_intervals: int = 4,
    per_interval: int = 12,
    with_contexts: bool = False,
) -> UsageBundle:
    intervals = [1900 + 10 * i for i in range(n_intervals)]
    n = n_intervals * per_interval
    vectors = rng.normal(size=(n, dim)).astype(np.float32)
    interval_index = np.repeat(np.arange(n_intervals), per_interval)
    contexts = [f"{word} in sentence {i}" for i in range(n)] if with_contexts else None
    return UsageBundle(
        word=word,
        dim=dim,
        n_usages=n,
        intervals=intervals,
        vectors=vectors,
        interval_index=interval_index,
        contexts=contexts,
    )


def planted_bundle(
    word: str,
    rng: np.random.Generator,
    n_types: int = 2,
    proportions: list[list[float]] | None = None,
    per_interval: int = 40,
    n_intervals: int = 4,
    dim: int = 8,
    separation: float = 10.0,
    sigma: float = 1.0,
    shared_slots: bool = False,
) -> tuple[UsageBundle, np.ndarray]:
    """Gaussian usage types with per-interval type proportions.

    ``proportions[t]`` gives the mixture over types in interval ``t``; counts
    are rounded deterministically, so the planted distributions are exact.
    With ``shared_slots`` the same per-type point clouds are reused in every
    interval, which keeps type proportions the only thing changing over time.
    Returns the bundle and the planted assignment of each row.
    """
    intervals = [1900 + 10 * i for i in range(n_intervals)]
    centres = rng.normal(scale=separation, size=(n_types, dim))
    if proportions is None:
        proportions = [[1.0 / n_types] * n_types] * n_intervals
    slot_clouds = rng.normal(scale=sigma, size=(n_types, per_interval, dim)) if shared_slots else None
    vectors, labels, truth = [], [], []
    for ti in range(n_intervals):
        counts = [round(per_interval * p) for p in proportions[ti]]
        counts[0] += per_interval - sum(counts)
        for usage_type, count in enumerate(counts):
            for j in range(count):
                if shared_slots:
                    noise = slot_clouds[usage_type][j % per_interval]
                else:
                    noise = rng.normal(scale=sigma, size=dim)
                vectors.append(centres[usage_type] + noise)
                labels.append(ti)
                truth.append(usage_type)
    bundle = UsageBundle(
        word=word,
        dim=dim,
        n_usages=len(vectors),
        intervals=intervals,
        vectors=np.array(vectors, dtype=np.float32),
        interval_index=np.array(labels, dtype=np.int64),
        contexts=[f"{word} context {i}" for i in range(len(vectors))],
    )
    return bundle, np.array(truth, dtype=np.int64)


@pytest.fixture
def rng():
    return np.random.default_rng(20260811)
