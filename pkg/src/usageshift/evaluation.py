"""Correlating model output with human data: Spearman rank correlation,
Mantel permutation tests between similarity matrices, judgement aggregation,
inter-annotator agreement, and annotation-pair sampling."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _scipy_stats

from .clustering import UsageTypeModel
from .store import GoldScores, JudgementSet, UsageBundle

EXACT_PERMUTATION_LIMIT = 10  # below this, the Spearman p-value is exact


def rank_average(x: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based), ties get the mean of their rank block."""
    x = np.asarray(x, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(x.shape[0])
    i = 0
    while i < x.shape[0]:
        j = i
        while j + 1 < x.shape[0] and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _pearson(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    if denom == 0.0:
        raise ValueError("zero variance: correlation undefined")
    return float(xc @ yc) / denom


def _exact_permutation_p(rx: np.ndarray, ry: np.ndarray, rho: float) -> float:
    """Two-sided exact p over all n! permutations of one rank vector."""
    n = rx.shape[0]
    xc = rx - rx.mean()
    yc = ry - ry.mean()
    denom = math.sqrt(float(xc @ xc) * float(yc @ yc))
    threshold = abs(rho) - 1e-12
    hits = 0
    total = 0
    perms = itertools.permutations(range(n))
    while True:
        batch = np.array(list(itertools.islice(perms, 20000)), dtype=np.intp)
        if batch.size == 0:
            break
        rhos = (yc[batch] @ xc) / denom
        hits += int((np.abs(rhos) >= threshold).sum())
        total += batch.shape[0]
    return hits / total


def spearman(x, y) -> tuple[float, float]:
    """Spearman rank correlation with average-rank tie handling.

    The p-value is two-sided: a t-approximation for n >= 10 and an exact
    permutation distribution for smaller samples.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"x and y must be equal-length vectors, got {x.shape} and {y.shape}")
    n = x.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 observations, got {n}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("inputs must be finite")
    rx = rank_average(x)
    ry = rank_average(y)
    rho = _pearson(rx, ry)
    if n < EXACT_PERMUTATION_LIMIT:
        p = _exact_permutation_p(rx, ry, rho)
    else:
        if abs(rho) >= 1.0:
            p = 0.0
        else:
            t = rho * math.sqrt((n - 2) / (1.0 - rho * rho))
            p = 2.0 * float(_scipy_stats.t.sf(abs(t), df=n - 2))
    return rho, p


# ---------------------------------------------------------------------------
# similarity matrices
# ---------------------------------------------------------------------------

@dataclass
class SimilarityMatrix:
    """Square symmetric matrix of pairwise usage similarities.

    The diagonal is ignored by every consumer; only off-diagonal entries
    carry signal.
    """

    word: str
    n: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.n, self.n):
            raise ValueError(f"expected a {self.n}x{self.n} matrix, got {self.values.shape}")
        if self.n < 3:
            raise ValueError(f"need n >= 3 for Mantel testing, got {self.n}")
        if not np.isfinite(self.values).all():
            raise ValueError("matrix entries must be finite")
        if not np.allclose(self.values, self.values.T, atol=1e-9):
            raise ValueError("matrix must be symmetric within 1e-9")

    def upper_triangle(self) -> np.ndarray:
        iu = np.triu_indices(self.n, k=1)
        return self.values[iu]


def average_judgements(judgements: JudgementSet) -> SimilarityMatrix:
    """Square matrix of mean human ratings per usage pair.

    Usage ids are ordered ascending; every unordered pair must be rated.
    Pairs recorded in either orientation (or repeatedly) are pooled.
    """
    ids = sorted(judgements.usages) if judgements.usages else sorted(
        {u for a, b, _ in judgements.pairs for u in (a, b)}
    )
    index = {u: i for i, u in enumerate(ids)}
    n = len(ids)
    pooled: dict[tuple[int, int], list[int]] = {}
    for a, b, ratings in judgements.pairs:
        if a == b:
            raise ValueError(f"self-pair ({a}, {a}) in judgements for {judgements.word!r}")
        key = (min(a, b), max(a, b))
        pooled.setdefault(key, []).extend(ratings)
    values = np.zeros((n, n))
    for i, a in enumerate(ids):
        for b in ids[i + 1 :]:
            ratings = pooled.get((min(a, b), max(a, b)))
            if not ratings:
                raise ValueError(f"missing ratings for pair ({a}, {b}) of {judgements.word!r}")
            m = float(np.mean(ratings))
            values[index[a], index[b]] = m
            values[index[b], index[a]] = m
    return SimilarityMatrix(word=judgements.word, n=n, values=values)


def model_similarity_matrix(usages: np.ndarray, word: str = "") -> SimilarityMatrix:
    """Pairwise similarity of usage vectors as ``1 / (1 + euclidean distance)``.

    Any strictly decreasing transform of the distance gives the same
    rank-based Mantel outcome; this one avoids division by zero.
    """
    usages = np.asarray(usages, dtype=np.float64)
    if usages.ndim != 2 or usages.shape[0] < 3:
        raise ValueError(f"need at least 3 usage vectors, got shape {usages.shape}")
    if not np.isfinite(usages).all():
        raise ValueError("usage vectors must be finite")
    sq = np.einsum("nd,nd->n", usages, usages)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (usages @ usages.T)
    np.maximum(d2, 0.0, out=d2)
    values = 1.0 / (1.0 + np.sqrt(d2))
    values = 0.5 * (values + values.T)  # exact symmetry despite float noise
    np.fill_diagonal(values, 1.0)
    return SimilarityMatrix(word=word, n=usages.shape[0], values=values)


def mantel_test(
    a: SimilarityMatrix,
    b: SimilarityMatrix,
    permutations: int = 9999,
    seed: int = 0,
) -> tuple[float, float]:
    """Spearman correlation between two similarity matrices with a
    permutation p-value.

    The statistic is the Spearman rho over the strictly-upper-triangle
    entries. Rows and columns of ``b`` are permuted jointly; the one-sided
    p-value uses the add-one estimator ``(1 + hits) / (permutations + 1)``.
    Permutation ``i`` draws from its own counter-based stream, so the result
    is independent of any parallel execution schedule.
    """
    if a.n != b.n:
        raise ValueError(f"matrix sizes differ: {a.n} vs {b.n}")
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    n = a.n
    iu0, iu1 = np.triu_indices(n, k=1)
    ra = rank_average(a.values[iu0, iu1])
    rb = rank_average(b.values[iu0, iu1])
    if np.all(ra == ra[0]) or np.all(rb == rb[0]):
        raise ValueError("constant off-diagonal matrix: correlation undefined")
    rac = ra - ra.mean()
    rbc = rb - rb.mean()
    denom = math.sqrt(float(rac @ rac) * float(rbc @ rbc))
    # rank matrix of b, so permuted triu ranks are gathered, not recomputed
    rank_mat = np.zeros((n, n))
    rank_mat[iu0, iu1] = rb
    rank_mat[iu1, iu0] = rb
    rho = float(rac @ rbc) / denom

    mean_b = rb.mean()
    hits = 0
    for i in range(permutations):
        rng = np.random.Generator(np.random.Philox(key=[seed, i]))
        pi = rng.permutation(n)
        permuted = rank_mat[pi[iu0], pi[iu1]]
        rho_i = float(rac @ (permuted - mean_b)) / denom
        if rho_i >= rho:
            hits += 1
    p = (1 + hits) / (permutations + 1)
    return rho, p


def evaluate_gems(scores: dict[str, float], gold: GoldScores) -> tuple[float, float, int]:
    """Spearman correlation between change scores and gold shift scores over
    the common vocabulary (sorted lexicographically). Returns (rho, p, n)."""
    common = sorted(set(scores) & set(gold.entries))
    if len(common) < 3:
        raise ValueError(f"need at least 3 words in common, got {len(common)}")
    x = [scores[w] for w in common]
    y = [gold.entries[w] for w in common]
    rho, p = spearman(x, y)
    return rho, p, len(common)


# ---------------------------------------------------------------------------
# inter-annotator agreement
# ---------------------------------------------------------------------------

def annotator_agreement(judgements: JudgementSet | list[JudgementSet], min_shared: int = 3) -> float:
    """Mean pairwise Spearman correlation between annotators sharing items.

    Annotator ``j`` is the j-th rating of each pair. Annotator pairs sharing
    fewer than ``min_shared`` items, or with constant ratings on the shared
    items, are skipped.
    """
    sets = [judgements] if isinstance(judgements, JudgementSet) else list(judgements)
    items: list[list[int]] = []
    for js in sets:
        items.extend(ratings for _, _, ratings in js.pairs)
    if not items:
        raise ValueError("no rated pairs")
    n_annotators = max(len(r) for r in items)
    rhos = []
    for i in range(n_annotators):
        for j in range(i + 1, n_annotators):
            xs = [r[i] for r in items if len(r) > max(i, j)]
            ys = [r[j] for r in items if len(r) > max(i, j)]
            if len(xs) < min_shared:
                continue
            try:
                rho, _ = spearman(xs, ys)
            except ValueError:
                continue
            rhos.append(rho)
    if not rhos:
        raise ValueError("no annotator pair shares enough comparable items")
    return float(np.mean(rhos))


# ---------------------------------------------------------------------------
# annotation-pair sampling
# ---------------------------------------------------------------------------

def sample_annotation_pairs(
    bundle: UsageBundle,
    model: UsageTypeModel,
    usages_per_type: int = 5,
    period_years: int = 20,
    seed: int = 0,
) -> list[tuple[int, int]]:
    """Sample usages for human annotation and return all unordered pairs.

    For each usage type, one usage is drawn per ``period_years``-wide period
    (first period starts at the bundle's earliest interval). When a type has
    no unsampled usage in the target period, a period that does contain one
    is drawn uniformly. Sampling is without replacement, so the output has
    no self pairs and no duplicates; with full coverage each type
    contributes exactly ``usages_per_type`` usages.
    """
    if bundle.contexts is None:
        raise ValueError("annotation sampling needs context snippets in the bundle")
    if model.assignments.shape[0] != bundle.n_usages:
        raise ValueError("model does not match bundle")
    if usages_per_type < 1:
        raise ValueError("usages_per_type must be >= 1")
    if period_years < 1:
        raise ValueError("period_years must be >= 1")

    labels = bundle.interval_labels()
    base = bundle.intervals[0]
    periods = (labels - base) // period_years
    n_periods = int((bundle.intervals[-1] - base) // period_years) + 1

    rng = np.random.default_rng(seed)
    sampled: list[int] = []
    for usage_type in range(model.k):
        members = np.flatnonzero(model.assignments == usage_type)
        by_period: dict[int, list[int]] = {}
        for u in members:
            by_period.setdefault(int(periods[u]), []).append(int(u))
        chosen: set[int] = set()
        picked: list[int] = []
        for slot in range(usages_per_type):
            target = slot if slot < n_periods else -1
            pool = [u for u in by_period.get(target, []) if u not in chosen]
            if not pool:
                available = sorted(
                    p for p, us in by_period.items() if any(u not in chosen for u in us)
                )
                if not available:
                    break  # the type has fewer distinct usages than requested
                target = available[int(rng.integers(len(available)))]
                pool = [u for u in by_period[target] if u not in chosen]
            pick = pool[int(rng.integers(len(pool)))]
            chosen.add(pick)
            picked.append(pick)
        sampled.extend(sorted(picked))
    return list(itertools.combinations(sorted(sampled), 2))
