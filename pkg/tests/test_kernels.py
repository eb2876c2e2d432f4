"""The numba kernels and their numpy fallbacks must agree."""

import numpy as np
import pytest

from usageshift import _kernels


@pytest.fixture
def both_backends():
    if not _kernels.HAS_NUMBA:
        pytest.skip("numba unavailable")
    state = _kernels.NUMBA_ENABLED
    yield
    _kernels.use_numba(state)


def _run_both(fn, *args):
    _kernels.use_numba(True)
    fast = fn(*args)
    _kernels.use_numba(False)
    slow = fn(*args)
    return fast, slow


@pytest.mark.parametrize("distance", ["euclidean", "cosine", "canberra"])
def test_apd_sum_backends_agree(both_backends, distance, rng):
    for _ in range(10):
        x = rng.normal(size=(rng.integers(1, 40), 16))
        y = rng.normal(size=(rng.integers(1, 40), 16))
        fast, slow = _run_both(_kernels.apd_sum, x, y, distance)
        assert fast == pytest.approx(slow, rel=1e-12)


@pytest.mark.parametrize("distance", ["euclidean", "cosine", "canberra"])
def test_apd_sum_zero_vectors(both_backends, distance):
    x = np.zeros((2, 4))
    y = np.vstack([np.zeros(4), np.ones(4)])
    fast, slow = _run_both(_kernels.apd_sum, x, y, distance)
    assert fast == pytest.approx(slow, rel=1e-12)
    if distance == "cosine":
        # zero vs zero is distance 0, zero vs non-zero is distance 1
        assert fast == pytest.approx(2.0)


def test_cluster_distance_sums_backends_agree(both_backends, rng):
    for _ in range(5):
        n = int(rng.integers(5, 60))
        z = rng.normal(size=(n, 8))
        labels = rng.integers(0, 3, size=n)
        fast, slow = _run_both(_kernels.cluster_distance_sums, z, labels, 3)
        np.testing.assert_allclose(fast, slow, rtol=1e-9, atol=1e-12)


def test_assign_to_centroids_backends_agree(both_backends, rng):
    for _ in range(5):
        z = rng.normal(size=(50, 6))
        centroids = rng.normal(size=(4, 6))
        _kernels.use_numba(True)
        labels_fast, d_fast = _kernels.assign_to_centroids(z, centroids)
        _kernels.use_numba(False)
        labels_slow, d_slow = _kernels.assign_to_centroids(z, centroids)
        assert np.array_equal(labels_fast, labels_slow)
        np.testing.assert_allclose(d_fast, d_slow, rtol=1e-9)


def test_unknown_distance_rejected():
    with pytest.raises(ValueError):
        _kernels.apd_sum(np.ones((1, 2)), np.ones((1, 2)), "manhattan")
