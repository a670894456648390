import math

import numpy as np
import pytest

from tbm_advisor.domain import N_COP, N_CXP
from tbm_advisor.errors import KExceedsIndexError, TooFewPointsError
from tbm_advisor.neighbors import (
    DegenerateKernelWarning,
    NeighborIndex,
    baseline_recommend,
    build_index,
    gaussian_weight,
)

from helpers import make_record


def _brute_force_knn(points, x, k):
    """Independent O(n^2)-style oracle: full stable sort on distances."""
    d = [float(np.linalg.norm(p - x)) for p in points]
    order = sorted(range(len(points)), key=lambda i: (d[i], i))
    return [(i, d[i]) for i in order[:k]]


def _pad(x, dim=N_CXP):
    out = np.zeros(dim)
    out[: len(x)] = x
    return out


class TestKernelWidth:
    def test_identical_points_floor_and_warn(self):
        points = np.tile(_pad([1.0, 2.0]), (16, 1))
        with pytest.warns(DegenerateKernelWarning):
            index = NeighborIndex(points)
        assert index.kernel_width == 1e-6

    def test_grid_line_matches_brute_force_average_std(self):
        # 100 points on a line, spacing 1
        points = np.stack([_pad([float(i)]) for i in range(100)])
        index = NeighborIndex(points)
        stds = []
        for i in range(100):
            dists = sorted(
                np.linalg.norm(points[j] - points[i]) for j in range(100) if j != i
            )[:15]
            stds.append(np.std(dists))
        assert abs(index.kernel_width - float(np.mean(stds))) < 1e-12

    def test_too_few_points(self):
        with pytest.raises(TooFewPointsError):
            NeighborIndex(np.zeros((15, N_CXP)))


class TestQuery:
    def test_two_point_index_returns_closer(self):
        points = np.stack([_pad([0.0]), _pad([5.0])])
        index = NeighborIndex(np.vstack([points] * 8))  # 16 points
        got = index.query(_pad([0.4]), k=1)
        assert got[0].distance == pytest.approx(0.4)

    def test_matches_brute_force_on_random_instances(self, rng):
        for _ in range(30):
            n = int(rng.integers(20, 120))
            points = rng.normal(size=(n, N_CXP))
            index = NeighborIndex(points)
            x = rng.normal(size=N_CXP)
            k = int(rng.integers(1, 16))
            got = index.query(x, k=k)
            expected = _brute_force_knn(points, x, k)
            assert [nb.index for nb in got] == [i for i, _ in expected]
            for nb, (_, d) in zip(got, expected):
                assert nb.distance == pytest.approx(d, abs=1e-9)

    def test_duplicates_returned_before_farther_points(self):
        rows = [_pad([0.0]), _pad([0.0]), _pad([3.0])] + [
            _pad([10.0 + i]) for i in range(14)
        ]
        index = NeighborIndex(np.stack(rows))
        got = index.query(_pad([0.0]), k=3)
        assert [nb.index for nb in got] == [0, 1, 2]

    def test_self_is_own_nearest_neighbor(self):
        points = np.stack([_pad([float(i)]) for i in range(20)])
        index = NeighborIndex(points)
        got = index.query(points[7], k=1)
        assert got[0].index == 7 and got[0].distance == 0.0

    def test_exclusion_skips_self(self):
        points = np.stack([_pad([float(i)]) for i in range(20)])
        index = NeighborIndex(points)
        got = index.query(points[7], k=1, exclude=7)
        assert got[0].index in (6, 8)

    def test_k_exceeds_index(self):
        points = np.stack([_pad([float(i)]) for i in range(16)])
        index = NeighborIndex(points)
        with pytest.raises(KExceedsIndexError):
            index.query(_pad([0.0]), k=17)

    def test_insertion_order_tie_break(self, rng):
        base = rng.normal(size=N_CXP)
        points = np.vstack([base] * 20)
        with pytest.warns(DegenerateKernelWarning):
            index = NeighborIndex(points)
        got = index.query(base, k=5)
        assert [nb.index for nb in got] == [0, 1, 2, 3, 4]


class TestGaussianWeight:
    def test_identical_points_weight_one(self):
        x = np.ones(N_CXP)
        assert gaussian_weight(x, x, 2.0) == 1.0

    def test_distance_equal_width(self):
        a = _pad([0.0])
        b = _pad([2.0])
        assert gaussian_weight(a, b, 2.0) == pytest.approx(math.exp(-1.0), abs=1e-12)

    def test_distance_twice_width(self):
        a = _pad([0.0])
        b = _pad([4.0])
        assert gaussian_weight(a, b, 2.0) == pytest.approx(math.exp(-4.0), abs=1e-12)

    def test_bounds(self, rng):
        for _ in range(200):
            a = rng.normal(size=N_CXP)
            b = rng.normal(size=N_CXP)
            w = gaussian_weight(a, b, float(rng.uniform(1.0, 5.0)))
            assert 0.0 < w <= 1.0
            assert (w == 1.0) == bool(np.array_equal(a, b))

    def test_scale_invariance(self, rng):
        a = rng.normal(size=N_CXP)
        b = rng.normal(size=N_CXP)
        width = 1.7
        for factor in (0.5, 3.0, 10.0):
            assert gaussian_weight(a * factor, b * factor, width * factor) == (
                pytest.approx(gaussian_weight(a, b, width), rel=1e-12)
            )


class TestBaselineRecommend:
    def _setup(self, rng, n=40):
        cxp = rng.normal(size=(n, N_CXP))
        cop = rng.normal(size=(n, N_COP))
        scores = rng.uniform(-1, 1, size=n)
        index = NeighborIndex(cxp)
        return index, cop, scores, cxp

    def test_shared_controls_give_zero_vector(self, rng):
        index, cop, scores, cxp = self._setup(rng)
        cop[:] = 1.5  # every neighbor shares the current controls
        deltas, no_improvement = baseline_recommend(
            index, cop, scores, cxp[0], np.full(N_COP, 1.5), current_score=-2.0
        )
        assert np.allclose(deltas, 0.0)
        assert not no_improvement

    def test_single_survivor_hand_computed(self, rng):
        # one neighbor at distance 0 with a unit offset on the first
        # control; everything else excluded by the score filter
        index, cop, scores, cxp = self._setup(rng)
        current_cxp = cxp[12]
        current_cop = cop[12].copy()
        scores[:] = 0.0
        scores[12] = 1.0  # only point 12 beats current score 0.5
        cop[12] = current_cop + np.array([1.0, 0.0, 0.0, 0.0, 0.0])
        deltas, no_improvement = baseline_recommend(
            index, cop, scores, current_cxp, current_cop, current_score=0.5
        )
        assert not no_improvement
        expected = np.array([1.0 / 15.0, 0.0, 0.0, 0.0, 0.0])
        assert np.allclose(deltas, expected, atol=1e-12)

    def test_no_better_neighbor_flags_no_improvement(self, rng):
        index, cop, scores, cxp = self._setup(rng)
        deltas, no_improvement = baseline_recommend(
            index, cop, scores, cxp[0], cop[0], current_score=99.0
        )
        assert no_improvement
        assert np.array_equal(deltas, np.zeros(N_COP))

    def test_invariant_to_corpus_ordering(self, rng):
        index, cop, scores, cxp = self._setup(rng, n=60)
        query_cxp = rng.normal(size=N_CXP)
        query_cop = rng.normal(size=N_COP)
        d1, _ = baseline_recommend(index, cop, scores, query_cxp, query_cop, 0.0)

        perm = rng.permutation(60)
        index2 = NeighborIndex(cxp[perm])
        d2, _ = baseline_recommend(
            index2, cop[perm], scores[perm], query_cxp, query_cop, 0.0
        )
        assert np.allclose(d1, d2, atol=1e-12)


def test_build_index_from_records(rng):
    records = [
        make_record(timestamp=10.0 * i, cxp=[float(v) for v in rng.normal(size=N_CXP)])
        for i in range(20)
    ]
    index = build_index(records)
    assert len(index) == 20
    assert index.kernel_width > 0
