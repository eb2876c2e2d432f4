"""Hot numeric kernels with numba-compiled and pure-numpy implementations.

Every kernel exists twice: a ``@njit`` version and a numpy fallback that
computes the same quantity with plain float64 arithmetic. The fallback is
selected when numba is unavailable or when the environment variable
``USAGESHIFT_NUMBA`` is set to ``0``/``false``/``off``. Both paths use
fixed-order summation so repeated runs are deterministic; across paths the
results agree to ~1e-12 relative.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

_env = os.environ.get("USAGESHIFT_NUMBA", "1").strip().lower()
NUMBA_ENABLED = HAS_NUMBA and _env not in ("0", "false", "off")

# Row-chunk size for the numpy fallbacks; bounds temporary arrays to
# roughly chunk * max(M, N) * dim float64 elements.
_CHUNK_BUDGET = 4_000_000


def use_numba(enabled: bool) -> None:
    """Switch the kernel backend at runtime (used by tests and benchmarks)."""
    global NUMBA_ENABLED
    NUMBA_ENABLED = bool(enabled) and HAS_NUMBA


def _chunk_rows(n_cols: int, dim: int) -> int:
    rows = _CHUNK_BUDGET // max(1, n_cols * dim)
    return max(1, rows)


# ---------------------------------------------------------------------------
# average pairwise distance sums
# ---------------------------------------------------------------------------

def _apd_sum_euclidean_np(x: np.ndarray, y: np.ndarray) -> float:
    total = 0.0
    step = _chunk_rows(y.shape[0], x.shape[1])
    for start in range(0, x.shape[0], step):
        block = x[start : start + step]
        diff = block[:, None, :] - y[None, :, :]
        total += float(np.sqrt(np.einsum("ijd,ijd->ij", diff, diff)).sum())
    return total


def _apd_sum_cosine_np(x: np.ndarray, y: np.ndarray) -> float:
    nx = np.sqrt(np.einsum("id,id->i", x, x))
    ny = np.sqrt(np.einsum("id,id->i", y, y))
    dots = x @ y.T
    # zero-norm rows have undefined direction: similarity 0 against anything,
    # except that two zero vectors are identical (distance 0)
    with np.errstate(divide="ignore", invalid="ignore"):
        sims = dots / np.outer(nx, ny)
    zx = nx == 0.0
    zy = ny == 0.0
    if zx.any() or zy.any():
        sims[zx, :] = 0.0
        sims[:, zy] = 0.0
        sims[np.ix_(zx, zy)] = 1.0
    return float((1.0 - sims).sum())


def _apd_sum_canberra_np(x: np.ndarray, y: np.ndarray) -> float:
    total = 0.0
    step = _chunk_rows(y.shape[0], x.shape[1])
    for start in range(0, x.shape[0], step):
        block = x[start : start + step]
        num = np.abs(block[:, None, :] - y[None, :, :])
        den = np.abs(block)[:, None, :] + np.abs(y)[None, :, :]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(den > 0.0, num / den, 0.0)
        total += float(terms.sum())
    return total


if HAS_NUMBA:

    @njit(cache=True)
    def _apd_sum_euclidean_nb(x, y):  # pragma: no cover - exercised via dispatch
        total = 0.0
        for i in range(x.shape[0]):
            for j in range(y.shape[0]):
                acc = 0.0
                for d in range(x.shape[1]):
                    diff = x[i, d] - y[j, d]
                    acc += diff * diff
                total += np.sqrt(acc)
        return total

    @njit(cache=True)
    def _apd_sum_cosine_nb(x, y):  # pragma: no cover
        # the dot products dominate; np.dot lowers to BLAS inside numba
        dots = np.dot(x, y.T)
        nx = np.empty(x.shape[0])
        for i in range(x.shape[0]):
            acc = 0.0
            for d in range(x.shape[1]):
                acc += x[i, d] * x[i, d]
            nx[i] = np.sqrt(acc)
        ny = np.empty(y.shape[0])
        for j in range(y.shape[0]):
            acc = 0.0
            for d in range(y.shape[1]):
                acc += y[j, d] * y[j, d]
            ny[j] = np.sqrt(acc)
        total = 0.0
        for i in range(x.shape[0]):
            for j in range(y.shape[0]):
                if nx[i] == 0.0 and ny[j] == 0.0:
                    sim = 1.0
                elif nx[i] == 0.0 or ny[j] == 0.0:
                    sim = 0.0
                else:
                    sim = dots[i, j] / (nx[i] * ny[j])
                total += 1.0 - sim
        return total

    @njit(cache=True)
    def _apd_sum_canberra_nb(x, y):  # pragma: no cover
        total = 0.0
        for i in range(x.shape[0]):
            for j in range(y.shape[0]):
                acc = 0.0
                for d in range(x.shape[1]):
                    den = abs(x[i, d]) + abs(y[j, d])
                    if den > 0.0:
                        acc += abs(x[i, d] - y[j, d]) / den
                total += acc
        return total


def apd_sum(x: np.ndarray, y: np.ndarray, distance: str) -> float:
    """Sum of pairwise distances between all rows of ``x`` and all rows of ``y``."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if NUMBA_ENABLED:
        if distance == "euclidean":
            return float(_apd_sum_euclidean_nb(x, y))
        if distance == "cosine":
            return float(_apd_sum_cosine_nb(x, y))
        if distance == "canberra":
            return float(_apd_sum_canberra_nb(x, y))
    else:
        if distance == "euclidean":
            return _apd_sum_euclidean_np(x, y)
        if distance == "cosine":
            return _apd_sum_cosine_np(x, y)
        if distance == "canberra":
            return _apd_sum_canberra_np(x, y)
    raise ValueError(f"unknown distance: {distance!r}")


# ---------------------------------------------------------------------------
# per-cluster distance sums (silhouette)
# ---------------------------------------------------------------------------

def _cluster_distance_sums_np(z: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    n = z.shape[0]
    onehot = np.zeros((n, k))
    onehot[np.arange(n), labels] = 1.0
    sums = np.zeros((n, k))
    step = _chunk_rows(n, z.shape[1])
    for start in range(0, n, step):
        block = z[start : start + step]
        diff = block[:, None, :] - z[None, :, :]
        dists = np.sqrt(np.einsum("ijd,ijd->ij", diff, diff))
        sums[start : start + step] = dists @ onehot
    return sums


if HAS_NUMBA:

    @njit(cache=True)
    def _cluster_distance_sums_nb(z, labels, k):  # pragma: no cover
        n = z.shape[0]
        sums = np.zeros((n, k))
        for i in range(n):
            for j in range(i + 1, n):
                acc = 0.0
                for d in range(z.shape[1]):
                    diff = z[i, d] - z[j, d]
                    acc += diff * diff
                dist = np.sqrt(acc)
                sums[i, labels[j]] += dist
                sums[j, labels[i]] += dist
        return sums


def cluster_distance_sums(z: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    """``sums[i, c]`` = sum of Euclidean distances from point ``i`` to every
    point assigned to cluster ``c`` (the self-distance contributes 0)."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if NUMBA_ENABLED:
        return np.asarray(_cluster_distance_sums_nb(z, labels, k))
    return _cluster_distance_sums_np(z, labels, k)


# ---------------------------------------------------------------------------
# centroid assignment (K-Means inner loop)
# ---------------------------------------------------------------------------

def _assign_to_centroids_np(z: np.ndarray, centroids: np.ndarray):
    n = z.shape[0]
    best = np.full(n, np.inf)
    labels = np.zeros(n, dtype=np.int64)
    for c in range(centroids.shape[0]):
        diff = z - centroids[c]
        d2 = np.einsum("nd,nd->n", diff, diff)
        better = d2 < best
        labels[better] = c
        best = np.where(better, d2, best)
    return labels, best


if HAS_NUMBA:

    @njit(cache=True)
    def _assign_to_centroids_nb(z, centroids):  # pragma: no cover
        n = z.shape[0]
        labels = np.zeros(n, dtype=np.int64)
        best = np.empty(n)
        for i in range(n):
            bd = np.inf
            bc = 0
            for c in range(centroids.shape[0]):
                acc = 0.0
                for d in range(z.shape[1]):
                    diff = z[i, d] - centroids[c, d]
                    acc += diff * diff
                if acc < bd:
                    bd = acc
                    bc = c
            labels[i] = bc
            best[i] = bd
        return labels, best


def assign_to_centroids(z: np.ndarray, centroids: np.ndarray):
    """Nearest-centroid labels and squared distances (ties -> lowest index)."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    centroids = np.ascontiguousarray(centroids, dtype=np.float64)
    if NUMBA_ENABLED:
        labels, best = _assign_to_centroids_nb(z, centroids)
        return np.asarray(labels), np.asarray(best)
    return _assign_to_centroids_np(z, centroids)
