"""Change metrics over usage-type distributions and raw usage matrices.

Three families of scores:

* entropy difference (ED): signed change in normalised entropy between two
  interval distributions; positive signals broadening, negative narrowing;
* Jensen-Shannon divergence (JSD), base 2 so values land in [0, 1], plus its
  order-insensitive generalisation to T distributions;
* average pairwise distance (APD) between raw usage vectors of two
  intervals, with cosine / Euclidean / Canberra variants - no clustering
  involved.

``change_series`` walks contiguous interval pairs and aggregates to
mean / max. Pairs touching an empty interval are recorded as gaps and never
enter the aggregates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .clustering import IntervalDistribution, UsageTypeModel, interval_distributions
from .store import UsageBundle, slice_by_interval

DISTANCES = ("cosine", "euclidean", "canberra")

NORMALISATION_TOL = 1e-9


class EmptyIntervalError(ValueError):
    """An interval has no usages; the caller records a gap and moves on."""


def _check_distribution(u: np.ndarray, name: str = "u") -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1 or u.shape[0] < 2:
        raise ValueError(f"{name} must have at least 2 usage types, got shape {u.shape}")
    if (u < 0).any():
        raise ValueError(f"{name} has negative entries")
    if abs(float(u.sum()) - 1.0) > NORMALISATION_TOL:
        raise ValueError(f"{name} is not normalised (sum={u.sum()!r})")
    return u


def normalised_entropy(u: np.ndarray) -> float:
    """Entropy of ``u`` in base K, so the uniform distribution scores 1.

    The 0 * log 0 terms contribute 0.
    """
    u = _check_distribution(u)
    k = u.shape[0]
    pos = u[u > 0]
    return float(-(pos * np.log(pos)).sum() / math.log(k))


def entropy_difference(u_t: np.ndarray, u_t2: np.ndarray) -> float:
    """Normalised entropy of the later distribution minus the earlier one.

    Positive values signal broadening, negative values narrowing.
    """
    u_t = _check_distribution(u_t, "u_t")
    u_t2 = _check_distribution(u_t2, "u_t2")
    if u_t.shape[0] != u_t2.shape[0]:
        raise ValueError(f"distributions disagree on K: {u_t.shape[0]} vs {u_t2.shape[0]}")
    return normalised_entropy(u_t2) - normalised_entropy(u_t)


def _entropy_bits(p: np.ndarray) -> float:
    pos = p[p > 0]
    return float(-(pos * np.log2(pos)).sum())


def jsd(u_t: np.ndarray, u_t2: np.ndarray, printed_form: bool = False) -> float:
    """Jensen-Shannon divergence in bits; symmetric, in [0, 1].

    ``printed_form`` switches the half-sum of the component entropies to a
    half-difference, for exactness studies against sources that define it
    that way; the default is the canonical divergence.
    """
    u_t = _check_distribution(u_t, "u_t")
    u_t2 = _check_distribution(u_t2, "u_t2")
    if u_t.shape[0] != u_t2.shape[0]:
        raise ValueError(f"distributions disagree on K: {u_t.shape[0]} vs {u_t2.shape[0]}")
    mixture = _entropy_bits(0.5 * (u_t + u_t2))
    if printed_form:
        return mixture - 0.5 * (_entropy_bits(u_t) - _entropy_bits(u_t2))
    return mixture - 0.5 * (_entropy_bits(u_t) + _entropy_bits(u_t2))


def jsd_multi(distributions: list[np.ndarray]) -> float:
    """Generalised JSD over T >= 2 distributions; order-insensitive."""
    if len(distributions) < 2:
        raise ValueError(f"need at least 2 distributions, got {len(distributions)}")
    checked = [_check_distribution(u, f"distributions[{i}]") for i, u in enumerate(distributions)]
    k = checked[0].shape[0]
    if any(u.shape[0] != k for u in checked):
        raise ValueError("distributions disagree on K")
    stacked = np.stack(checked)
    return _entropy_bits(stacked.mean(axis=0)) - float(
        np.mean([_entropy_bits(u) for u in checked])
    )


def apd(u_t: np.ndarray, u_t2: np.ndarray, distance: str = "euclidean") -> float:
    """Average pairwise distance between the rows of two usage matrices.

    Operates on raw (non-standardised) representations. Cosine distance is
    ``1 - cosine similarity``; Canberra terms with both coordinates 0
    contribute 0.
    """
    if distance not in DISTANCES:
        raise ValueError(f"distance must be one of {DISTANCES}, got {distance!r}")
    u_t = np.asarray(u_t, dtype=np.float64)
    u_t2 = np.asarray(u_t2, dtype=np.float64)
    if u_t.ndim != 2 or u_t2.ndim != 2:
        raise ValueError("usage matrices must be 2-D")
    if u_t.shape[0] == 0 or u_t2.shape[0] == 0:
        raise EmptyIntervalError("cannot average distances against an empty interval")
    if u_t.shape[1] != u_t2.shape[1]:
        raise ValueError(f"dimension mismatch: {u_t.shape[1]} vs {u_t2.shape[1]}")
    total = _kernels.apd_sum(u_t, u_t2, distance)
    return total / (u_t.shape[0] * u_t2.shape[0])


# ---------------------------------------------------------------------------
# contiguous-interval series
# ---------------------------------------------------------------------------

METRICS = ("ed", "jsd", "apd")


@dataclass
class ChangeScoreSeries:
    """Per contiguous-interval-pair metric values plus mean/max aggregates."""

    word: str
    metric: str
    intervals: list[int]
    pairwise: list[float]
    pairs: list[tuple[int, int]]
    gaps: list[tuple[int, int]]
    mean: float
    max: float
    distance: str | None = None

    def aggregate(self, how: str) -> float:
        if how == "mean":
            return self.mean
        if how == "max":
            return self.max
        raise ValueError(f"aggregation must be 'mean' or 'max', got {how!r}")

    def to_dict(self) -> dict:
        doc = {
            "word": self.word,
            "metric": self.metric,
            "intervals": self.intervals,
            "pairwise": self.pairwise,
            "gaps": [list(g) for g in self.gaps],
            "mean": self.mean,
            "max": self.max,
        }
        if self.distance is not None:
            doc["distance"] = self.distance
        return doc


def _resolve_intervals(bundle: UsageBundle, intervals: list[int] | None) -> list[int]:
    if intervals is None:
        return list(bundle.intervals)
    unknown = [t for t in intervals if t not in bundle.intervals]
    if unknown:
        raise ValueError(f"intervals {unknown} not present in bundle for {bundle.word!r}")
    if any(b <= a for a, b in zip(intervals, intervals[1:])):
        raise ValueError(f"requested intervals must be strictly increasing: {intervals}")
    return [int(t) for t in intervals]


def change_series(
    bundle: UsageBundle,
    model: UsageTypeModel | None,
    metric: str,
    distance: str = "euclidean",
    intervals: list[int] | None = None,
    printed_jsd: bool = False,
) -> ChangeScoreSeries:
    """Metric values across all contiguous pairs of the requested intervals.

    ED and JSD need a fitted model; APD works straight off the bundle. A pair
    with an empty side becomes a gap: reported, but excluded from mean/max.
    """
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}, got {metric!r}")
    considered = _resolve_intervals(bundle, intervals)
    if len(considered) < 2:
        raise ValueError(f"need at least 2 intervals, got {considered}")

    if metric in ("ed", "jsd"):
        if model is None:
            raise ValueError(f"metric {metric!r} needs a fitted usage-type model; run clustering first")
        dists = {d.interval: d for d in interval_distributions(bundle, model)}
        sides = [dists[t] for t in considered]

        def value(a: IntervalDistribution, b: IntervalDistribution) -> float | None:
            if a.is_empty or b.is_empty:
                return None
            if metric == "ed":
                return entropy_difference(a.prob, b.prob)
            return jsd(a.prob, b.prob, printed_form=printed_jsd)

        used_distance = None
    else:
        sides = [slice_by_interval(bundle, t) for t in considered]

        def value(a: np.ndarray, b: np.ndarray) -> float | None:
            if a.shape[0] == 0 or b.shape[0] == 0:
                return None
            return apd(a, b, distance=distance)

        used_distance = distance

    pairwise: list[float] = []
    pairs: list[tuple[int, int]] = []
    gaps: list[tuple[int, int]] = []
    for i in range(len(considered) - 1):
        v = value(sides[i], sides[i + 1])
        label_pair = (considered[i], considered[i + 1])
        if v is None:
            gaps.append(label_pair)
        else:
            pairwise.append(float(v))
            pairs.append(label_pair)
    if not pairwise:
        raise ValueError(
            f"fewer than 2 usable intervals for {bundle.word!r}: all contiguous pairs touch an empty interval"
        )
    return ChangeScoreSeries(
        word=bundle.word,
        metric=metric,
        intervals=considered,
        pairwise=pairwise,
        pairs=pairs,
        gaps=gaps,
        mean=float(np.mean(pairwise)),
        max=float(np.max(pairwise)),
        distance=used_distance,
    )


def jsd_multi_series(
    bundle: UsageBundle,
    model: UsageTypeModel,
    intervals: list[int] | None = None,
) -> tuple[float, list[int], list[int]]:
    """Generalised JSD over all non-empty requested intervals.

    Returns ``(value, used_intervals, empty_intervals)``.
    """
    considered = _resolve_intervals(bundle, intervals)
    dists = {d.interval: d for d in interval_distributions(bundle, model)}
    used = [t for t in considered if not dists[t].is_empty]
    empty = [t for t in considered if dists[t].is_empty]
    if len(used) < 2:
        raise ValueError(f"need at least 2 non-empty intervals, got {used}")
    return jsd_multi([dists[t].prob for t in used]), used, empty


def frequency_baseline(count_t: int, total_t: int, count_t2: int, total_t2: int) -> float:
    """Difference in relative frequency between two intervals."""
    if total_t <= 0 or total_t2 <= 0:
        raise ValueError(f"totals must be positive, got {total_t} and {total_t2}")
    if count_t < 0 or count_t2 < 0:
        raise ValueError("counts must be non-negative")
    return count_t2 / total_t2 - count_t / total_t
