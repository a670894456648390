import numpy as np
import pytest

from tbm_advisor.domain import GroundClass, ValidationCell
from tbm_advisor.neighbors import NeighborIndex
from tbm_advisor.validate import (
    build_report,
    contextual_validation,
    render_table,
    synchronized_validation,
)

from helpers import make_record


def _fixture_drive():
    """11 records; 5 operator actions on the first control.

    Observed deltas at t=10,30,50,70,90: +1, -1, +1, +1, -1.
    Scores chosen so the 4 recommended-sign matches improve 3 times.
    """
    cop1 = [5.0, 6.0, 6.0, 5.0, 5.0, 6.0, 6.0, 7.0, 7.0, 6.0, 6.0]
    scores = [0.0, 0.5, 0.4, 0.6, 0.1, 0.3, 0.2, 0.25, 0.9, 0.1, 0.1]
    records = [
        make_record(
            timestamp=10.0 * i,
            tunnel_length=0.01 * i,
            cop=[cop1[i], 1.0, 1.0, 1.0, 1.0],
        )
        for i in range(11)
    ]
    actions = [frozenset({10.0, 30.0, 50.0, 70.0, 90.0})] + [frozenset()] * 4
    rec_signs = {0: +0.5, 2: -0.5, 4: +0.5, 6: -0.5, 8: -0.5}

    def recommender(i):
        out = np.zeros(5)
        out[0] = rec_signs.get(i, 0.0)
        return out

    return records, scores, actions, recommender


class TestSynchronizedValidation:
    def test_hand_enumerated_fixture(self):
        records, scores, actions, recommender = _fixture_drive()
        cells = synchronized_validation(records, scores, actions, recommender)
        assert cells[0].total == 4
        assert cells[0].valid == 3
        assert cells[0].ratio == 0.75
        for j in range(1, 5):
            assert cells[j].total == 0 and cells[j].ratio is None

    def test_replay_recommender_matches_improvement_fraction(self):
        records, scores, actions, _ = _fixture_drive()
        cop = np.array([r.cop for r in records])

        def replay(i):
            return cop[i + 1] - cop[i]

        cells = synchronized_validation(records, scores, actions, replay)
        # 5 actions; the score improved after 4 of them
        assert cells[0].total == 5
        assert cells[0].valid == 4
        assert cells[0].ratio == pytest.approx(0.8)

    def test_opposite_recommender_counts_nothing(self):
        records, scores, actions, _ = _fixture_drive()
        cop = np.array([r.cop for r in records])

        def contrarian(i):
            return -(cop[i + 1] - cop[i])

        cells = synchronized_validation(records, scores, actions, contrarian)
        assert cells[0].total == 0
        assert cells[0].ratio is None

    def test_zero_recommendation_never_matches(self):
        records, scores, actions, _ = _fixture_drive()
        cells = synchronized_validation(records, scores, actions, lambda i: np.zeros(5))
        assert all(c.total == 0 for c in cells)

    def test_literal_sign_mode_counts_positive_scores(self):
        records, scores, actions, recommender = _fixture_drive()
        cells = synchronized_validation(
            records, scores, actions, recommender, literal_sign=True
        )
        # matches at i=0,2,4,8 -> scores at t+1: 0.5, 0.6, 0.3, 0.1 all > 0
        assert cells[0].total == 4
        assert cells[0].valid == 4

    def test_counters_merge_associatively(self):
        records, scores, actions, recommender = _fixture_drive()
        whole = synchronized_validation(records, scores, actions, recommender)
        # split between the i=5 and i=6 records (no action at t=60)
        left = synchronized_validation(records[:6], scores[:6], actions, recommender)

        def shifted(i):
            return recommender(i + 6)

        right = synchronized_validation(records[6:], scores[6:], actions, shifted)
        assert whole[0].total == left[0].total + right[0].total
        assert whole[0].valid == left[0].valid + right[0].valid

    def test_deterministic(self):
        records, scores, actions, recommender = _fixture_drive()
        a = synchronized_validation(records, scores, actions, recommender)
        b = synchronized_validation(records, scores, actions, recommender)
        assert a == b


def _cv_fixture(rng, n=20):
    records = []
    for i in range(n):
        records.append(
            make_record(
                timestamp=10.0 * i,
                tunnel_length=0.01 * i,
                cop=[float(v) for v in rng.normal(size=5)],
                cxp=[float(v) for v in rng.normal(size=19)],
            )
        )
    scores = rng.normal(size=n)
    recs = rng.normal(size=(n, 5)) * 0.5

    def recommender(i):
        return recs[i]

    return records, scores, recommender


def _brute_force_cv(records, scores, rec_fn, k=15, deadband=1e-9, gap=1e-9):
    """Independent pairwise reimplementation of contextual counting."""
    n = len(records)
    cxp = [np.array(r.cxp) for r in records]
    cop = [np.array(r.cop) for r in records]
    valid = [0] * 5
    total = [0] * 5
    for i in range(n):
        dists = sorted(
            (float(np.linalg.norm(cxp[j] - cxp[i])), j) for j in range(n) if j != i
        )
        neighborhood = [j for _, j in dists[:k]]
        rec = np.asarray(rec_fn(i), dtype=float)
        target = cop[i] + rec
        best = None
        best_d = None
        for j in neighborhood:
            if abs(scores[j] - scores[i]) <= gap:
                continue
            d = float(np.linalg.norm(target - cop[j]))
            if best_d is None or d < best_d:
                best_d = d
                best = j
        if best is None:
            continue
        for idx in range(5):
            obs = cop[best][idx] - cop[i][idx]
            if abs(obs) < deadband or abs(rec[idx]) < deadband:
                continue
            if (obs > 0) != (rec[idx] > 0):
                continue
            total[idx] += 1
            if scores[best] - scores[i] > 0:
                valid[idx] += 1
    return valid, total


class TestContextualValidation:
    def test_matches_brute_force_oracle(self, rng):
        records, scores, recommender = _cv_fixture(rng)
        index = NeighborIndex(np.array([r.cxp for r in records]))
        cells = contextual_validation(records, scores, recommender, index)
        valid, total = _brute_force_cv(records, scores, recommender)
        assert [c.valid for c in cells] == valid
        assert [c.total for c in cells] == total

    def test_exact_twin_with_better_score_selected(self, rng):
        records, scores, recommender = _cv_fixture(rng)
        scores = np.zeros(len(records))
        rec = np.full(5, 0.25)
        target_cop = np.array(records[0].cop) + rec
        records[7] = make_record(
            timestamp=records[7].timestamp,
            tunnel_length=records[7].tunnel_length,
            cop=[float(v) for v in target_cop],
            cxp=list(records[0].cxp),  # context twin of record 0
        )
        scores[7] = 1.0
        index = NeighborIndex(np.array([r.cxp for r in records]))
        cells = contextual_validation(records, scores, lambda i: rec, index)
        # every control moved in the recommended direction and improved
        assert all(c.total >= 1 for c in cells)
        assert all(c.valid >= 1 for c in cells)

    def test_identical_scores_skip_samples(self, rng):
        records, scores, recommender = _cv_fixture(rng)
        flat = np.zeros(len(records))
        index = NeighborIndex(np.array([r.cxp for r in records]))
        cells = contextual_validation(records, flat, recommender, index)
        assert all(c.total == 0 for c in cells)

    def test_deterministic(self, rng):
        records, scores, recommender = _cv_fixture(rng)
        index = NeighborIndex(np.array([r.cxp for r in records]))
        a = contextual_validation(records, scores, recommender, index)
        b = contextual_validation(records, scores, recommender, index)
        assert a == b


class TestReport:
    def _cells(self, ratio_pairs):
        return tuple(ValidationCell(valid=v, total=t) for v, t in ratio_pairs)

    def test_uniform_cells_average_to_same_value(self):
        cells = self._cells([(1, 2)] * 5)
        report = build_report(
            "GB",
            {gc: cells for gc in GroundClass},
            {gc: cells for gc in GroundClass},
        )
        assert report.grand_average("sync") == 0.5
        for gc in GroundClass:
            assert report.row_average("sync", gc) == 0.5
        for j in range(5):
            assert report.column_average("contextual", j) == 0.5

    def test_single_defined_cell_dominates(self):
        empty = self._cells([(0, 0)] * 5)
        one = self._cells([(3, 4), (0, 0), (0, 0), (0, 0), (0, 0)])
        report = build_report(
            "GB",
            {GroundClass.GC1: one, GroundClass.GC2: empty},
            {GroundClass.GC1: empty, GroundClass.GC2: empty},
        )
        assert report.grand_average("sync") == 0.75
        assert report.row_average("sync", GroundClass.GC2) is None
        assert report.grand_average("contextual") is None

    def test_mixed_cells_hand_average(self):
        gc1 = self._cells([(1, 2), (1, 4), (0, 0), (2, 2), (0, 1)])
        gc2 = self._cells([(1, 1), (0, 0), (0, 0), (0, 0), (0, 0)])
        report = build_report("GB", {GroundClass.GC1: gc1, GroundClass.GC2: gc2},
                              {GroundClass.GC1: gc1, GroundClass.GC2: gc2})
        # defined ratios: 0.5, 0.25, 1.0, 0.0 | 1.0
        assert report.row_average("sync", GroundClass.GC1) == pytest.approx(0.4375)
        assert report.grand_average("sync") == pytest.approx((0.5 + 0.25 + 1.0 + 0.0 + 1.0) / 5)
        assert report.column_average("sync", 0) == pytest.approx(0.75)

    def test_to_dict_recomputable(self):
        cells = self._cells([(1, 2), (3, 4), (0, 0), (2, 2), (0, 1)])
        report = build_report("NN", {GroundClass.GC3: cells}, {GroundClass.GC3: cells})
        d = report.to_dict()
        block = d["synchronized"]["GC3"]
        assert block["cells"][1] == {"valid": 3, "total": 4, "ratio": 0.75}
        assert d["grand_averages"]["synchronized"] == report.grand_average("sync")

    def test_render_table_layout(self):
        cells = self._cells([(1, 2)] * 5)
        gb = build_report("GB", {GroundClass.GC1: cells}, {GroundClass.GC1: cells})
        nn = build_report("NN", {GroundClass.GC1: cells}, {GroundClass.GC1: cells})
        text = render_table([gb, nn])
        assert "Synchronized Validation" in text
        assert "Contextual Validation" in text
        assert "GC1" in text and "CoP1" in text
        assert "GB" in text and "NN" in text
