"""Acceptance gate.

One test per criterion, each printing a PASS line with its headline numbers
(run with ``pytest -s tests/test_acceptance.py`` to see them):

1. metric unit oracles against independent brute-force implementations
2. property suites, >= 1000 randomized cases each
3. planted-cluster recovery and drift ranking
4. narrowing/broadening signs of the entropy difference
5. rank statistics: Spearman oracle, Mantel exactness and calibration
6. byte-identical pipeline determinism
7. annotation-pair sampling contract

Correlation studies against full historical corpora and their gold ratings
are out of reach on a workstation, so everything here is oracle- or
property-based on synthetic data with pinned tolerances.
"""

import itertools
import json
import math
import time

import numpy as np
import pytest

from usageshift import _kernels
from usageshift.cli import main
from usageshift.clustering import (
    fit_usage_types,
    interval_distributions,
    kmeans_fit,
    select_k,
    silhouette_score,
    standardise,
)
from usageshift.evaluation import (
    SimilarityMatrix,
    average_judgements,
    mantel_test,
    model_similarity_matrix,
    sample_annotation_pairs,
    spearman,
)
from usageshift.metrics import (
    apd,
    change_series,
    entropy_difference,
    frequency_baseline,
    jsd,
    jsd_multi,
    normalised_entropy,
)
from usageshift.store import UsageBundle, save_bundle, slice_by_interval

from conftest import make_bundle, planted_bundle
from test_clustering import brute_force_silhouette, fake_model
from test_evaluation import judgement_set, oracle_spearman

TOL_ENTROPY = 1e-9
TOL_RELATIVE = 1e-6


@pytest.fixture(scope="module", autouse=True)
def warm_kernels():
    # trigger numba compilation outside the timed budgets
    z = np.random.default_rng(0).normal(size=(8, 3))
    _kernels.apd_sum(z, z, "euclidean")
    _kernels.apd_sum(z, z, "cosine")
    _kernels.apd_sum(z, z, "canberra")
    _kernels.cluster_distance_sums(z, np.array([0, 1] * 4), 2)
    _kernels.assign_to_centroids(z, z[:2])


def separated_centres(rng, k, dim, min_distance=10.0):
    """Centres with pairwise Euclidean distance >= 10 sigma (sigma = 1)."""
    while True:
        centres = rng.normal(scale=10.0, size=(k, dim))
        diffs = centres[:, None, :] - centres[None, :, :]
        dist = np.sqrt((diffs**2).sum(-1)) + np.eye(k) * 1e9
        if dist.min() >= min_distance:
            return centres


# ---------------------------------------------------------------------------
# 1. metric unit oracles
# ---------------------------------------------------------------------------

def test_criterion_1_metric_unit_oracles():
    start = time.monotonic()

    # normalised entropy: direct evaluation of -sum u log_K u
    u = np.array([0.9, 0.1])
    oracle = -sum(p * math.log(p, 2) for p in u)
    assert normalised_entropy(u) == pytest.approx(oracle, abs=TOL_ENTROPY)

    # entropy difference from the entropy oracle
    ed = entropy_difference([0.5, 0.5], [0.9, 0.1])
    assert ed == pytest.approx(oracle - 1.0, abs=TOL_ENTROPY)

    # jsd: H(3/4, 1/4) - (H(p) + H(q))/2 by hand
    h34 = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
    assert jsd([1.0, 0.0], [0.5, 0.5]) == pytest.approx(h34 - 0.5, abs=TOL_ENTROPY)

    # generalised jsd: H(1/2, 1/2) - mean component entropy
    got = jsd_multi([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    assert got == pytest.approx(1.0 - 1.0 / 3.0, abs=TOL_ENTROPY)

    # apd singletons by hand
    assert apd(np.array([[0.0, 0.0]]), np.array([[3.0, 4.0]])) == pytest.approx(
        5.0, rel=TOL_RELATIVE
    )
    assert apd(np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]), "canberra") == pytest.approx(
        2 / 4 + 2 / 6, rel=TOL_RELATIVE
    )
    # apd against a python double loop on random matrices
    rng = np.random.default_rng(11)
    x, y = rng.normal(size=(50, 16)), rng.normal(size=(50, 16))
    for distance in ("euclidean", "cosine", "canberra"):
        from test_metrics import naive_apd

        assert apd(x, y, distance) == pytest.approx(naive_apd(x, y, distance), rel=TOL_RELATIVE)

    # standardisation: population-std formula
    z = standardise(np.array([[1.0], [2.0], [3.0]])).z
    pop = math.sqrt(((np.array([1, 2, 3]) - 2.0) ** 2).mean())
    np.testing.assert_allclose(z[:, 0], (np.array([1, 2, 3]) - 2.0) / pop, atol=TOL_ENTROPY)

    # kmeans global optimum by exhaustive enumeration of 2-partitions
    points = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    best = min(
        sum(
            ((points[list(side)] - points[list(side)].mean(0)) ** 2).sum()
            for side in (part, tuple(set(range(4)) - set(part)))
        )
        for r in (1, 2)
        for part in itertools.combinations(range(4), r)
    )
    fit = kmeans_fit(points, 2, seed=0)
    assert fit.distortion == pytest.approx(best, rel=TOL_RELATIVE)
    assert best == pytest.approx(1.0)

    # silhouette against the O(N^2) reference formula
    z4 = np.array([[0.0], [0.1], [10.0], [10.1]])
    good = silhouette_score(z4, np.array([0, 0, 1, 1]))
    assert good >= 0.97
    assert good == pytest.approx(brute_force_silhouette(z4, np.array([0, 0, 1, 1])), rel=TOL_RELATIVE)
    bad = silhouette_score(z4, np.array([0, 1, 0, 1]))
    assert bad < 0
    assert bad == pytest.approx(brute_force_silhouette(z4, np.array([0, 1, 0, 1])), rel=TOL_RELATIVE)

    # interval distributions by hand count
    bundle = make_bundle(
        word="w", dim=2, intervals=[1900, 1910],
        rows=[(0, np.zeros(2)), (0, np.ones(2)), (1, np.ones(2))],
    )
    dists = interval_distributions(bundle, fake_model("w", 2, [0, 0, 1]))
    assert [d.freq.tolist() for d in dists] == [[2, 0], [0, 1]]
    assert dists[0].prob.tolist() == [1.0, 0.0]

    # slice: interleaved labels keep order
    inter = make_bundle(
        word="w", dim=1, intervals=[1900, 1910],
        rows=[(0, [0.0]), (1, [1.0]), (0, [2.0]), (1, [3.0])],
    )
    assert slice_by_interval(inter, 1900)[:, 0].tolist() == [0.0, 2.0]

    # vectors.bin byte arithmetic
    assert 4 * bundle.n_usages * bundle.dim == 24

    # frequency baseline arithmetic
    assert frequency_baseline(100, 10_000_000, 300, 15_000_000) == pytest.approx(1.0e-5)
    assert frequency_baseline(1, 10, 0, 10) == pytest.approx(-0.1)

    # spearman with ties against rank-then-pearson
    assert spearman([1, 1, 2, 3], [2, 1, 3, 4])[0] == pytest.approx(
        oracle_spearman([1, 1, 2, 3], [2, 1, 3, 4]), abs=1e-12
    )

    # mantel recovers a known permutation
    rng = np.random.default_rng(5)
    v = rng.random((8, 8))
    v = 0.5 * (v + v.T)
    np.fill_diagonal(v, 1.0)
    a = SimilarityMatrix(word="w", n=8, values=v)
    pi = rng.permutation(8)
    shuffled = v[np.ix_(pi, pi)]
    restored = shuffled[np.ix_(np.argsort(pi), np.argsort(pi))]
    rho, _ = mantel_test(a, SimilarityMatrix(word="w", n=8, values=restored), permutations=49, seed=0)
    assert rho == pytest.approx(1.0)

    # inverse-distance similarity: unit distance -> 0.5
    sim = model_similarity_matrix(np.array([[0.0], [1.0], [9.0]]))
    assert sim.values[0, 1] == pytest.approx(0.5)

    # judgement averaging: mean of 1..4 is 2.5
    js = judgement_set([(0, 1, [1, 2, 3, 4]), (0, 2, [4]), (1, 2, [2])])
    assert average_judgements(js).values[0, 1] == pytest.approx(2.5)

    # sampling combinatorics: 2 types x 5 periods -> C(10, 2) pairs
    rows, assignments, contexts = [], [], []
    for ti in range(10):
        for usage_type in (0, 1):
            for _ in range(3):
                rows.append((ti, np.full(2, float(usage_type) * 8)))
                assignments.append(usage_type)
                contexts.append(f"c{len(contexts)}")
    cov = make_bundle(
        word="w", dim=2, intervals=[1900 + 10 * i for i in range(10)],
        rows=rows, contexts=contexts,
    )
    pairs = sample_annotation_pairs(cov, fake_model("w", 2, assignments), seed=0)
    assert len(pairs) == math.comb(10, 2) == 45

    elapsed = time.monotonic() - start
    assert elapsed < 10.0
    print(f"\n[PASS] criterion 1: metric unit oracles ({elapsed:.2f}s < 10s)")


# ---------------------------------------------------------------------------
# 2. property suites (>= 1000 randomized cases each)
# ---------------------------------------------------------------------------

def random_distribution(rng, k):
    u = rng.random(k)
    return u / u.sum()


def test_criterion_2_property_suites():
    start = time.monotonic()
    cases = 1000

    rng = np.random.default_rng(101)
    for _ in range(cases):
        k = int(rng.integers(2, 9))
        p, q = random_distribution(rng, k), random_distribution(rng, k)
        v = jsd(p, q)
        assert v == jsd(q, p)
        assert -1e-12 <= v <= 1.0 + 1e-12

    rng = np.random.default_rng(102)
    for _ in range(cases):
        k = int(rng.integers(2, 9))
        p, q = random_distribution(rng, k), random_distribution(rng, k)
        ed = entropy_difference(p, q)
        assert ed == -entropy_difference(q, p)
        assert -1.0 - 1e-12 <= ed <= 1.0 + 1e-12

    rng = np.random.default_rng(103)
    distances = ("euclidean", "cosine", "canberra")
    for i in range(cases):
        x = rng.normal(size=(int(rng.integers(1, 12)), 6))
        y = rng.normal(size=(int(rng.integers(1, 12)), 6))
        d = distances[i % 3]
        forward = apd(x, y, d)
        assert forward >= 0.0
        assert forward == pytest.approx(apd(y, x, d), rel=1e-9)

    rng = np.random.default_rng(104)
    for _ in range(cases):
        k = int(rng.integers(2, 7))
        t = int(rng.integers(2, 7))
        dists = [random_distribution(rng, k) for _ in range(t)]
        ref = jsd_multi(dists)
        order = rng.permutation(t)
        assert jsd_multi([dists[i] for i in order]) == pytest.approx(ref, abs=1e-12)

    rng = np.random.default_rng(105)
    for _ in range(cases):
        n = int(rng.integers(8, 201))
        k = int(rng.integers(2, 6))
        labels = rng.integers(0, k, size=n)
        labels[:k] = np.arange(k)  # every cluster non-empty
        z = rng.normal(size=(n, 3))
        score = silhouette_score(z, labels)
        assert -1.0 <= score <= 1.0
        assert score == pytest.approx(brute_force_silhouette(z, labels), abs=1e-9)

    rng = np.random.default_rng(106)
    for trial in range(cases):
        n = int(rng.integers(10, 50))
        z = rng.normal(size=(n, 4))
        fit = kmeans_fit(z, int(rng.integers(2, 5)), seed=trial, restarts=1)
        assert (np.diff(fit.history) <= 1e-9).all()

    rng = np.random.default_rng(107)
    for _ in range(cases):
        n_int = int(rng.integers(2, 6))
        per = int(rng.integers(1, 9))
        k = int(rng.integers(2, 5))
        n = n_int * per
        bundle = UsageBundle(
            word="w", dim=2, n_usages=n, intervals=list(range(1900, 1900 + 10 * n_int, 10)),
            vectors=rng.normal(size=(n, 2)).astype(np.float32),
            interval_index=rng.integers(0, n_int, size=n),
        )
        dists = interval_distributions(bundle, fake_model("w", k, rng.integers(0, k, size=n)))
        assert sum(d.n_t for d in dists) == n

    elapsed = time.monotonic() - start
    assert elapsed < 120.0
    print(f"\n[PASS] criterion 2: 7 property suites x {cases} cases ({elapsed:.1f}s < 120s)")


# ---------------------------------------------------------------------------
# 3. planted-cluster recovery and drift ranking
# ---------------------------------------------------------------------------

def recovery_word(word_index: int) -> tuple[UsageBundle, int]:
    rng = np.random.default_rng(3000 + word_index)
    k_star = 2 + word_index % 4
    centres = separated_centres(rng, k_star, 16)
    intervals = [1910 + 10 * i for i in range(10)]
    vectors, labels = [], []
    share = [1.0 / k_star] * k_star
    for ti in range(10):
        counts = [round(100 * s) for s in share]
        counts[0] += 100 - sum(counts)
        for usage_type, count in enumerate(counts):
            vectors.append(centres[usage_type] + rng.normal(size=(count, 16)))
            labels.extend([ti] * count)
    bundle = UsageBundle(
        word=f"word{word_index:02d}", dim=16, n_usages=1000, intervals=intervals,
        vectors=np.concatenate(vectors).astype(np.float32),
        interval_index=np.asarray(labels),
    )
    return bundle, k_star


def drift_word(word_index: int, drift: float) -> UsageBundle:
    # identical geometry for every word: scores differ only through the drift
    rng = np.random.default_rng(77)
    centres = separated_centres(rng, 2, 16)
    clouds = rng.normal(size=(2, 100, 16))
    intervals = [1910 + 10 * i for i in range(10)]
    vectors, labels = [], []
    for ti in range(10):
        c2 = round(100 * drift * ti / 9)
        rows = [centres[0] + clouds[0][j] for j in range(100 - c2)]
        rows += [centres[1] + clouds[1][j] for j in range(c2)]
        vectors.extend(rows)
        labels.extend([ti] * 100)
    return UsageBundle(
        word=f"drift{word_index:02d}", dim=16, n_usages=1000, intervals=intervals,
        vectors=np.asarray(vectors, dtype=np.float32),
        interval_index=np.asarray(labels),
    )


def test_criterion_3_planted_recovery_and_drift_ranking():
    start = time.monotonic()

    words = [recovery_word(i) for i in range(20)]
    runs = 0
    recovered = 0
    for bundle, k_star in words:
        z = standardise(bundle.vectors).z
        for seed in range(10):
            sel = select_k(z, k_min=2, k_max=10, seed=seed, restarts=10)
            runs += 1
            recovered += sel.k == k_star
    rate = recovered / runs
    assert rate >= 0.95, f"recovered {recovered}/{runs}"

    drifts = [0.0] * 4 + [round(0.05 + 0.03 * i, 2) for i in range(16)]
    jsd_scores, apd_scores = [], []
    for i, drift in enumerate(drifts):
        bundle = drift_word(i, drift)
        model = fit_usage_types(bundle, k_min=2, k_max=5, seed=0, restarts=5)
        jsd_scores.append(change_series(bundle, model, "jsd").max)
        apd_scores.append(change_series(bundle, None, "apd", distance="euclidean").max)

    stable = [s for s, d in zip(jsd_scores, drifts) if d == 0.0]
    moving = [s for s, d in zip(jsd_scores, drifts) if d > 0.0]
    assert max(stable) < min(moving), "a stable word outranks a drifting word under JSD-max"
    stable_apd = [s for s, d in zip(apd_scores, drifts) if d == 0.0]
    moving_apd = [s for s, d in zip(apd_scores, drifts) if d > 0.0]
    assert max(stable_apd) < min(moving_apd), "a stable word outranks a drifting word under APD-max"

    rho_jsd, _ = spearman(jsd_scores, drifts)
    rho_apd, _ = spearman(apd_scores, drifts)
    assert rho_jsd >= 0.9
    assert rho_apd >= 0.9

    elapsed = time.monotonic() - start
    assert elapsed < 300.0
    print(
        f"\n[PASS] criterion 3: recovery {recovered}/{runs}, "
        f"drift Spearman jsd={rho_jsd:.3f} apd={rho_apd:.3f} ({elapsed:.1f}s < 300s)"
    )


# ---------------------------------------------------------------------------
# 4. narrowing / broadening signs
# ---------------------------------------------------------------------------

def ramp_bundle(word: str, shares: list[float], seed: int) -> UsageBundle:
    rng = np.random.default_rng(seed)
    centres = separated_centres(rng, 2, 8)
    intervals = [1900 + 10 * i for i in range(len(shares))]
    vectors, labels = [], []
    for ti, share in enumerate(shares):
        c2 = round(80 * share)
        vectors.append(centres[0] + rng.normal(size=(80 - c2, 8)))
        vectors.append(centres[1] + rng.normal(size=(c2, 8)))
        labels.extend([ti] * 80)
    return UsageBundle(
        word=word, dim=8, n_usages=80 * len(shares), intervals=intervals,
        vectors=np.concatenate(vectors).astype(np.float32),
        interval_index=np.asarray(labels),
    )


def test_criterion_4_narrowing_broadening_signs():
    start = time.monotonic()
    broadening_shares = [0.0, 0.125, 0.25, 0.375, 0.5]
    for seed in range(10):
        broad = ramp_bundle("broad", broadening_shares, seed=900 + seed)
        model = fit_usage_types(broad, k_max=5, seed=seed, restarts=5)
        assert change_series(broad, model, "ed").mean > 0.0

        narrow = ramp_bundle("narrow", broadening_shares[::-1], seed=900 + seed)
        model = fit_usage_types(narrow, k_max=5, seed=seed, restarts=5)
        assert change_series(narrow, model, "ed").mean < 0.0
    elapsed = time.monotonic() - start
    print(f"\n[PASS] criterion 4: ED sign correct in 10/10 seeds both ways ({elapsed:.1f}s)")


# ---------------------------------------------------------------------------
# 5. rank statistics
# ---------------------------------------------------------------------------

def test_criterion_5_statistics():
    start = time.monotonic()

    rng = np.random.default_rng(501)
    for _ in range(1000):
        n = int(rng.integers(10, 60))
        x = rng.normal(size=n)
        y = rng.normal(size=n)
        if rng.random() < 0.5:
            x = np.round(x)  # ties
            y = np.round(2 * y) / 2
        if np.all(x == x[0]) or np.all(y == y[0]):
            continue
        rho, _ = spearman(x, y)
        assert rho == pytest.approx(oracle_spearman(x, y), abs=1e-12)

    v = np.random.default_rng(502).random((10, 10))
    v = 0.5 * (v + v.T)
    np.fill_diagonal(v, 1.0)
    a = SimilarityMatrix(word="w", n=10, values=v)
    rho, p = mantel_test(a, a, permutations=99, seed=1)
    assert rho == pytest.approx(1.0)
    assert p == 1 / 100

    low = 0
    trials = 200
    for trial in range(trials):
        t_rng = np.random.default_rng(5100 + trial)
        mats = []
        for _ in range(2):
            m = t_rng.random((10, 10))
            m = 0.5 * (m + m.T)
            np.fill_diagonal(m, 1.0)
            mats.append(SimilarityMatrix(word="w", n=10, values=m))
        _, p_i = mantel_test(mats[0], mats[1], permutations=99, seed=trial)
        low += p_i <= 0.05
    assert low <= trials * 0.10, f"{low}/{trials} false positives"

    elapsed = time.monotonic() - start
    print(
        f"\n[PASS] criterion 5: spearman oracle x1000, mantel p=1/(P+1), "
        f"{low}/{trials} null rejections ({elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# 6. determinism of the full pipeline
# ---------------------------------------------------------------------------

def build_pipeline_corpus(root):
    bundles = root / "bundles"
    rng = np.random.default_rng(61)
    specs = {
        "steady": [[0.7, 0.3]] * 5,
        "broad": [[1.0 - 0.1 * t, 0.1 * t] for t in range(5)],
        "burst": [[1.0, 0.0], [1.0, 0.0], [0.5, 0.5], [0.5, 0.5], [0.5, 0.5]],
    }
    for word, proportions in specs.items():
        bundle, _ = planted_bundle(
            word, rng, n_types=2, proportions=proportions,
            per_interval=30, n_intervals=5, shared_slots=True,
        )
        save_bundle(bundle, bundles / word)
    gold = root / "gold.tsv"
    gold.write_text("steady\t0.1\nbroad\t1.9\nburst\t2.2\n", encoding="utf-8")
    return bundles, gold


def run_pipeline(bundles, gold, out):
    assert main(["cluster", "--bundles", str(bundles), "--out", str(out / "models"),
                 "--k-max", "4", "--restarts", "4", "--seed", "13"]) == 0
    for metric in ("ed", "jsd"):
        assert main(["change", "--bundles", str(bundles), "--models", str(out / "models"),
                     "--out", str(out / f"scores-{metric}.jsonl"), "--metric", metric,
                     "--agg", "max"]) == 0
    assert main(["change", "--bundles", str(bundles), "--out", str(out / "scores-apd.jsonl"),
                 "--metric", "apd", "--distance", "euclidean", "--agg", "max"]) == 0
    for fmt in ("csv", "json", "svg"):
        assert main(["export", "--bundles", str(bundles), "--models", str(out / "models"),
                     "--word", "broad", "--format", fmt,
                     "--out", str(out / f"broad.{fmt}")]) == 0
    assert main(["sample-pairs", "--bundles", str(bundles), "--models", str(out / "models"),
                 "--out", str(out / "sampled"), "--seed", "13"]) == 0
    assert main(["eval", "gems", "--scores", str(out / "scores-apd.jsonl"),
                 "--gold", str(gold), "--out", str(out / "gems.json")]) == 0


def test_criterion_6_pipeline_determinism(tmp_path):
    start = time.monotonic()
    bundles, gold = build_pipeline_corpus(tmp_path)
    out1, out2 = tmp_path / "run1", tmp_path / "run2"
    run_pipeline(bundles, gold, out1)
    run_pipeline(bundles, gold, out2)

    files1 = sorted(p.relative_to(out1) for p in out1.rglob("*") if p.is_file())
    files2 = sorted(p.relative_to(out2) for p in out2.rglob("*") if p.is_file())
    assert files1 == files2
    assert len(files1) >= 15
    for rel in files1:
        assert (out1 / rel).read_bytes() == (out2 / rel).read_bytes(), f"{rel} differs"

    elapsed = time.monotonic() - start
    print(
        f"\n[PASS] criterion 6: {len(files1)} artifacts byte-identical across reruns "
        f"({elapsed:.1f}s)"
    )


# ---------------------------------------------------------------------------
# 7. annotation sampling contract
# ---------------------------------------------------------------------------

def test_criterion_7_annotation_sampling(rng):
    start = time.monotonic()
    for word_index, k_star in enumerate((2, 3, 4)):
        word_rng = np.random.default_rng(700 + word_index)
        bundle, _ = planted_bundle(
            f"w{k_star}", word_rng, n_types=k_star,
            per_interval=5 * k_star, n_intervals=10, dim=8,
        )
        model = fit_usage_types(bundle, k_max=6, seed=0, restarts=5)
        assert model.k == k_star
        pairs = sample_annotation_pairs(bundle, model, usages_per_type=5, period_years=20, seed=9)
        assert len(pairs) == math.comb(5 * model.k, 2)
        assert all(a != b for a, b in pairs)
        assert len(set(pairs)) == len(pairs)
        assert len(set(map(tuple, map(sorted, pairs)))) == len(pairs)
    elapsed = time.monotonic() - start
    print(f"\n[PASS] criterion 7: C(5k,2) pairs, no self/duplicate pairs ({elapsed:.1f}s)")
