"""Usage-type induction: standardisation, seeded K-Means with silhouette
model selection, and per-interval usage-type distributions.

K selection follows a fixed recipe: for every K in the candidate range run
``restarts`` independent careful-seeded K-Means fits, keep the restart with
minimal distortion, and pick the K whose best fit maximises the silhouette
score (ties broken by smaller K, then smaller distortion). Everything is a
pure function of the inputs and the seed, so distinct words can be fitted in
parallel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from . import _kernels
from .store import FLOAT_DTYPE, UsageBundle

VARIANCE_EPS = 1e-12

MODEL_FILE = "model.json"
CENTROIDS_FILE = "centroids.bin"
ASSIGNMENTS_FILE = "assignments.json"


class StandardiseResult(NamedTuple):
    z: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    constant_mask: np.ndarray


def standardise(u: np.ndarray) -> StandardiseResult:
    """Column-wise centre and scale to unit population variance.

    Columns whose population std is <= 1e-12 are centred only and flagged in
    ``constant_mask``; their ``std`` entry is reported as 1 so that
    ``(u - mean) / std`` reproduces ``z``.
    """
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] < 2:
        raise ValueError(f"need at least 2 usages to standardise, got shape {u.shape}")
    mean = u.mean(axis=0)
    std = u.std(axis=0)
    constant = std <= VARIANCE_EPS
    effective = np.where(constant, 1.0, std)
    z = (u - mean) / effective
    return StandardiseResult(z=z, mean=mean, std=effective, constant_mask=constant)


@dataclass
class KMeansFit:
    centroids: np.ndarray
    assignments: np.ndarray
    distortion: float
    # distortion after each Lloyd iteration of the winning restart
    history: list[float] = field(default_factory=list)


def _careful_seed_init(z: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Initial centroids sampled proportionally to squared distance from the
    already-chosen ones (careful seeding)."""
    n = z.shape[0]
    centroids = np.empty((k, z.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = z[first]
    diff = z - centroids[0]
    d2 = np.einsum("nd,nd->n", diff, diff)
    for c in range(1, k):
        total = d2.sum()
        if total > 0.0:
            probs = d2 / total
            choice = int(rng.choice(n, p=probs))
        else:
            choice = int(rng.integers(n))
        centroids[c] = z[choice]
        diff = z - centroids[c]
        d2 = np.minimum(d2, np.einsum("nd,nd->n", diff, diff))
    return centroids


def _repair_empty_clusters(z, labels, centroids, counts):
    """Give each empty cluster the point currently farthest from its centroid."""
    sq = np.einsum("nd,nd->n", z - centroids[labels], z - centroids[labels])
    for c in np.flatnonzero(counts == 0):
        movable = counts[labels] > 1
        if not movable.any():
            break
        candidate = int(np.flatnonzero(movable)[np.argmax(sq[movable])])
        counts[labels[candidate]] -= 1
        labels[candidate] = c
        counts[c] += 1
        sq[candidate] = 0.0
    return labels, counts


def _lloyd(z: np.ndarray, init: np.ndarray, max_iters: int) -> KMeansFit:
    k = init.shape[0]
    centroids = init.copy()
    labels = np.full(z.shape[0], -1, dtype=np.int64)
    history: list[float] = []
    for _ in range(max_iters):
        new_labels, _ = _kernels.assign_to_centroids(z, centroids)
        counts = np.bincount(new_labels, minlength=k)
        if (counts == 0).any():
            new_labels, counts = _repair_empty_clusters(z, new_labels, centroids, counts)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centroids[c] = z[labels == c].mean(axis=0)
        diff = z - centroids[labels]
        history.append(float(np.einsum("nd,nd->n", diff, diff).sum()))
    return KMeansFit(
        centroids=centroids, assignments=labels, distortion=history[-1], history=history
    )


def kmeans_fit(
    z: np.ndarray, k: int, seed: int, restarts: int = 10, max_iters: int = 300
) -> KMeansFit:
    """Best-of-``restarts`` K-Means, each run to assignment fixpoint.

    Restart ``r`` is seeded with ``seed + r`` so the whole fit is a pure
    function of ``(z, k, seed, restarts)``. Returns the restart with minimal
    distortion; no returned cluster is ever empty.
    """
    z = np.asarray(z, dtype=np.float64)
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if z.shape[0] < k:
        raise ValueError(f"need at least k={k} points, got {z.shape[0]}")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    best: KMeansFit | None = None
    for r in range(restarts):
        rng = np.random.default_rng(seed + r)
        fit = _lloyd(z, _careful_seed_init(z, k, rng), max_iters)
        if best is None or fit.distortion < best.distortion:
            best = fit
    return best


def silhouette_score(z: np.ndarray, assignments: np.ndarray) -> float:
    """Mean silhouette over all points, Euclidean distance.

    ``s(i) = (b(i) - a(i)) / max(a(i), b(i))`` with ``a`` the mean
    intra-cluster distance (self excluded) and ``b`` the smallest mean
    distance to another cluster. Points in singleton clusters score 0.
    """
    z = np.asarray(z, dtype=np.float64)
    assignments = np.asarray(assignments, dtype=np.int64)
    k = int(assignments.max()) + 1 if assignments.size else 0
    counts = np.bincount(assignments, minlength=k)
    if k < 2 or (counts == 0).any():
        raise ValueError("silhouette needs at least 2 non-empty clusters")
    n = z.shape[0]
    if n < k + 1:
        raise ValueError(f"silhouette needs N >= k+1, got N={n}, k={k}")
    sums = _kernels.cluster_distance_sums(z, assignments, k)
    return _silhouette_from_sums(sums, assignments, counts)


def _silhouette_from_sums(sums: np.ndarray, assignments: np.ndarray, counts: np.ndarray) -> float:
    n = sums.shape[0]
    own = counts[assignments]
    with np.errstate(invalid="ignore", divide="ignore"):
        a = sums[np.arange(n), assignments] / (own - 1)
    other = sums / counts[None, :]
    other[np.arange(n), assignments] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = (b - a) / denom
    s = np.where(own == 1, 0.0, s)       # singleton convention
    s = np.where(denom == 0.0, 0.0, s)   # coincident points
    return float(s.mean())


def _silhouette_from_distances(dists: np.ndarray, assignments: np.ndarray, k: int) -> float:
    onehot = np.zeros((dists.shape[0], k))
    onehot[np.arange(dists.shape[0]), assignments] = 1.0
    sums = dists @ onehot
    return _silhouette_from_sums(sums, assignments, np.bincount(assignments, minlength=k))


# Precomputing the full distance matrix pays off while it fits in memory.
_DENSE_DISTANCE_LIMIT = 3000


def _pairwise_distances(z: np.ndarray) -> np.ndarray:
    sq = np.einsum("nd,nd->n", z, z)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (z @ z.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return np.sqrt(d2)


@dataclass
class KSelection:
    """Outcome of silhouette-based K selection on a standardised matrix."""

    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    silhouette: float
    distortion: float
    seed: int
    # (k, silhouette, distortion) for every candidate K, in K order
    candidates: list[tuple[int, float, float]] = field(default_factory=list)


def select_k(
    z: np.ndarray,
    k_min: int = 2,
    k_max: int = 10,
    seed: int = 0,
    restarts: int = 10,
    max_iters: int = 300,
    monosemy_threshold: float | None = None,
) -> KSelection:
    """Fit K-Means for each K in ``[k_min, min(k_max, N-1)]`` and keep the K
    with maximal silhouette (ties: smaller K, then smaller distortion).

    When ``monosemy_threshold`` is given and the mean distance to the global
    centroid falls below it, a single-cluster selection is returned instead
    (silhouette NaN: it is undefined for one cluster).
    """
    z = np.asarray(z, dtype=np.float64)
    n = z.shape[0]
    if k_min < 2:
        raise ValueError(f"k_min must be >= 2, got {k_min}")
    if k_max < k_min:
        raise ValueError(f"k_max {k_max} < k_min {k_min}")
    if n < k_min + 1:
        raise ValueError(f"need at least k_min+1={k_min + 1} points, got {n}")

    if monosemy_threshold is not None:
        centre = z.mean(axis=0)
        dispersion = float(np.sqrt(np.einsum("nd,nd->n", z - centre, z - centre)).mean())
        if dispersion < monosemy_threshold:
            diff = z - centre
            return KSelection(
                k=1,
                centroids=centre[None, :],
                assignments=np.zeros(n, dtype=np.int64),
                silhouette=float("nan"),
                distortion=float(np.einsum("nd,nd->n", diff, diff).sum()),
                seed=seed,
                candidates=[],
            )

    dists = _pairwise_distances(z) if n <= _DENSE_DISTANCE_LIMIT else None
    fits: list[tuple[int, float, KMeansFit]] = []
    for k in range(k_min, min(k_max, n - 1) + 1):
        fit = kmeans_fit(z, k, seed=seed, restarts=restarts, max_iters=max_iters)
        if dists is not None:
            score = _silhouette_from_distances(dists, fit.assignments, k)
        else:
            score = silhouette_score(z, fit.assignments)
        fits.append((k, score, fit))
    k, score, fit = min(fits, key=lambda item: (-item[1], item[0], item[2].distortion))
    return KSelection(
        k=k,
        centroids=fit.centroids,
        assignments=fit.assignments,
        silhouette=score,
        distortion=fit.distortion,
        seed=seed,
        candidates=[(k_, s_, f_.distortion) for k_, s_, f_ in fits],
    )


# ---------------------------------------------------------------------------
# fitted model and interval distributions
# ---------------------------------------------------------------------------

@dataclass
class UsageTypeModel:
    """Fitted usage-type clustering for one word.

    Centroids live in the standardised space defined by ``mean``/``std``;
    ``assignments[i]`` is the usage type of bundle row ``i``.
    """

    word: str
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    silhouette: float
    distortion: float
    seed: int

    def transform(self, vectors: np.ndarray) -> np.ndarray:
        """Map raw usage vectors into the model's standardised space."""
        return (np.asarray(vectors, dtype=np.float64) - self.mean) / self.std


def fit_usage_types(
    bundle: UsageBundle,
    k_min: int = 2,
    k_max: int = 10,
    seed: int = 42,
    restarts: int = 10,
    max_iters: int = 300,
    monosemy_threshold: float | None = None,
) -> UsageTypeModel:
    """Standardise a bundle's usage matrix and select its usage types.

    ``monosemy_threshold`` is compared against the dispersion of the *raw*
    usage matrix (standardising would put every word at the same dispersion,
    about sqrt(dim)); words below it get a single usage type.
    """
    z, mean, std, _ = standardise(bundle.vectors)
    raw_threshold = None
    if monosemy_threshold is not None:
        raw = np.asarray(bundle.vectors, dtype=np.float64)
        centre = raw.mean(axis=0)
        dispersion = float(np.sqrt(np.einsum("nd,nd->n", raw - centre, raw - centre)).mean())
        if dispersion < monosemy_threshold:
            raw_threshold = np.inf  # force the single-cluster branch on z
    sel = select_k(
        z,
        k_min=k_min,
        k_max=k_max,
        seed=seed,
        restarts=restarts,
        max_iters=max_iters,
        monosemy_threshold=raw_threshold,
    )
    return UsageTypeModel(
        word=bundle.word,
        k=sel.k,
        centroids=sel.centroids,
        assignments=sel.assignments,
        mean=mean,
        std=std,
        silhouette=sel.silhouette,
        distortion=sel.distortion,
        seed=seed,
    )


@dataclass
class IntervalDistribution:
    """Usage-type counts and the normalised distribution for one interval."""

    word: str
    interval: int
    freq: np.ndarray
    prob: np.ndarray | None
    n_t: int

    @property
    def is_empty(self) -> bool:
        return self.n_t == 0


def interval_distributions(bundle: UsageBundle, model: UsageTypeModel) -> list[IntervalDistribution]:
    """Per-interval usage-type frequency vectors, in interval order.

    Empty intervals are flagged (``prob`` is None), never dropped.
    """
    if model.assignments.shape[0] != bundle.n_usages:
        raise ValueError(
            f"model fitted on {model.assignments.shape[0]} usages, bundle has {bundle.n_usages}"
        )
    out = []
    for idx, t in enumerate(bundle.intervals):
        mask = bundle.interval_index == idx
        freq = np.bincount(model.assignments[mask], minlength=model.k).astype(np.int64)
        n_t = int(freq.sum())
        prob = freq / n_t if n_t > 0 else None
        out.append(IntervalDistribution(word=bundle.word, interval=t, freq=freq, prob=prob, n_t=n_t))
    return out


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def save_model(model: UsageTypeModel, path: str | Path, config: dict | None = None) -> None:
    """Write ``model.json`` + ``centroids.bin`` (float32 LE) + ``assignments.json``."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    doc = {
        "word": model.word,
        "k": model.k,
        "seed": model.seed,
        "silhouette": None if np.isnan(model.silhouette) else model.silhouette,
        "distortion": model.distortion,
        "mean": model.mean.tolist(),
        "std": model.std.tolist(),
    }
    if config is not None:
        doc["config"] = config
    (path / MODEL_FILE).write_text(
        json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    (path / CENTROIDS_FILE).write_bytes(model.centroids.astype(FLOAT_DTYPE).tobytes())
    (path / ASSIGNMENTS_FILE).write_text(
        json.dumps(model.assignments.tolist()) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path) -> UsageTypeModel:
    path = Path(path)
    doc = json.loads((path / MODEL_FILE).read_text(encoding="utf-8"))
    mean = np.asarray(doc["mean"], dtype=np.float64)
    centroids = (
        np.frombuffer((path / CENTROIDS_FILE).read_bytes(), dtype=FLOAT_DTYPE)
        .reshape(doc["k"], mean.shape[0])
        .astype(np.float64)
    )
    assignments = np.asarray(
        json.loads((path / ASSIGNMENTS_FILE).read_text(encoding="utf-8")), dtype=np.int64
    )
    sil = doc["silhouette"]
    return UsageTypeModel(
        word=doc["word"],
        k=doc["k"],
        centroids=centroids,
        assignments=assignments,
        mean=mean,
        std=np.asarray(doc["std"], dtype=np.float64),
        silhouette=float("nan") if sil is None else float(sil),
        distortion=float(doc["distortion"]),
        seed=int(doc["seed"]),
    )
