"""Recommendation credibility: how well the model performs on the
historic neighborhood of the current operating point.

Two error metrics are evaluated per neighbor: the absolute prediction
error of the optimality score, and the gap between the first-order
(gradient-based) score change predicted for the neighbor's observed
control step and the score change that actually followed. Both are
normalized against validation-set percentiles, averaged, complemented to
one, and finally combined over the neighborhood with Gaussian distance
weights.
"""

from __future__ import annotations

import numpy as np

from .domain import N_COP, CredibilityCalibration
from .errors import NoSuccessorError, TooFewEligibleNeighborsError
from .neighbors import DEFAULT_NEIGHBORS, NeighborIndex
from .optimality import percentile


def neighbor_errors(model, x, y_true, delta_cop, delta_y):
    """Error pair for one neighbor with a recorded consecutive observation.

    ``x`` is the neighbor's standardized 24-feature vector, ``y_true`` its
    observed raw score. ``delta_cop`` (standardized control step to the
    successor) and ``delta_y`` (observed score change) feed the
    first-order comparison: the inner product of the control gradient
    with the step is the score change the model implies.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    delta_cop = np.asarray(delta_cop, dtype=float).reshape(-1)
    if delta_cop.shape[0] != N_COP:
        raise NoSuccessorError("successor control step must have 5 entries")
    pred = float(model.predict(x))
    grad = np.asarray(model.input_gradient(x), dtype=float).reshape(-1)[:N_COP]
    e1 = abs(pred - float(y_true))
    e2 = abs(float(grad @ delta_cop) - float(delta_y))
    return e1, e2


def normalize_error(e: float, q5: float, q95: float) -> float:
    """Clip (e - Q5)/(Q95 - Q5) into [0, 1]; degenerate spans snap to 0/1."""
    if q95 == q5:
        return 0.0 if e <= q5 else 1.0
    return float(min(1.0, max(0.0, (e - q5) / (q95 - q5))))


def trust(e1_norm: float, e2_norm: float) -> float:
    """Complement-to-one of the mean normalized error."""
    return 1.0 - (e1_norm + e2_norm) / 2.0


def successor_deltas(records, scores, gap_factor: float = 1.5):
    """Per-record successor info for the trust metrics.

    A record is *eligible* when the next record exists, sits one nominal
    sampling step away, and shares the ground class. Returns
    (eligible bool array, control deltas (n, 5), score deltas (n,)).
    """
    n = len(records)
    ts = np.array([r.timestamp for r in records], dtype=float)
    cop = np.array([r.cop for r in records], dtype=float)
    scores = np.asarray(scores, dtype=float)
    eligible = np.zeros(n, dtype=bool)
    dcop = np.zeros((n, N_COP))
    dy = np.zeros(n)
    if n < 2:
        return eligible, dcop, dy
    diffs = np.diff(ts)
    nominal = float(np.median(diffs))
    for i in range(n - 1):
        if diffs[i] <= gap_factor * nominal and records[i].ground_class == records[i + 1].ground_class:
            eligible[i] = True
            dcop[i] = cop[i + 1] - cop[i]
            dy[i] = scores[i + 1] - scores[i]
    return eligible, dcop, dy


def calibrate(e1_values, e2_values) -> CredibilityCalibration:
    """Percentile calibration of both error metrics (validation split)."""
    return CredibilityCalibration(
        q5=(percentile(e1_values, 5), percentile(e2_values, 5)),
        q95=(percentile(e1_values, 95), percentile(e2_values, 95)),
    )


class CredibilityScorer:
    """Precomputes neighbor trust values so live scoring is one query.

    Built over the training corpus: features (n, 24), raw scores (n,),
    the context index (for its kernel width), the frozen model and its
    calibration. Only successor-bearing points participate; queries find
    the nearest eligible points, so ineligible ones are transparently
    replaced by the next nearest.
    """

    def __init__(
        self,
        index: NeighborIndex,
        model,
        calibration: CredibilityCalibration,
        features: np.ndarray,
        scores: np.ndarray,
        eligible: np.ndarray,
        delta_cop: np.ndarray,
        delta_y: np.ndarray,
        n_neighbors: int | None = None,
    ):
        self.n_neighbors = n_neighbors or index.n_neighbors
        self.kernel_width = index.kernel_width
        eligible = np.asarray(eligible, dtype=bool)
        if eligible.sum() < self.n_neighbors:
            raise TooFewEligibleNeighborsError(
                f"need >= {self.n_neighbors} successor-bearing points, "
                f"got {int(eligible.sum())}"
            )
        features = np.asarray(features, dtype=float)
        scores = np.asarray(scores, dtype=float)
        self._cxp = index.points[eligible]
        x = features[eligible]
        preds = np.asarray(model.predict(x), dtype=float).reshape(-1)
        grads = np.asarray(model.input_gradient(x), dtype=float)[:, :N_COP]
        e1 = np.abs(preds - scores[eligible])
        e2 = np.abs(
            np.einsum("ij,ij->i", grads, np.asarray(delta_cop, dtype=float)[eligible])
            - np.asarray(delta_y, dtype=float)[eligible]
        )
        q5_1, q5_2 = calibration.q5
        q95_1, q95_2 = calibration.q95
        e1n = _normalize_array(e1, q5_1, q95_1)
        e2n = _normalize_array(e2, q5_2, q95_2)
        self.trusts = 1.0 - (e1n + e2n) / 2.0

    def score(self, cxp) -> float:
        """Gaussian-weighted mean trust over the nearest eligible points."""
        x = np.asarray(cxp, dtype=float).reshape(-1)
        diff = self._cxp - x
        d2 = np.einsum("ij,ij->i", diff, diff)
        order = np.argsort(d2, kind="stable")[: self.n_neighbors]
        w = np.exp(-d2[order] / self.kernel_width**2)
        return float(np.sum(w * self.trusts[order]) / self.n_neighbors)


def _normalize_array(e: np.ndarray, q5: float, q95: float) -> np.ndarray:
    if q95 == q5:
        return (e > q5).astype(float)
    return np.clip((e - q5) / (q95 - q5), 0.0, 1.0)


def credibility(
    index: NeighborIndex,
    model,
    calibration: CredibilityCalibration,
    features,
    scores,
    eligible,
    delta_cop,
    delta_y,
    current_cxp,
    n_neighbors: int = DEFAULT_NEIGHBORS,
) -> float:
    """One-shot credibility evaluation (see CredibilityScorer for reuse)."""
    scorer = CredibilityScorer(
        index,
        model,
        calibration,
        features,
        scores,
        eligible,
        delta_cop,
        delta_y,
        n_neighbors=n_neighbors,
    )
    return scorer.score(current_cxp)
