"""Exact nearest-neighbor search over standardized context space, Gaussian
distance weighting, and the neighbor-average baseline recommender.

Search is a vectorized linear scan with a stable sort, so ties resolve by
insertion order and results are reproducible bit for bit. Corpora here
are a few thousand points; an exact scan is faster than tree bookkeeping
at that scale.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from sklearn.utils.validation import check_array

from .domain import N_COP, N_CXP
from .errors import KExceedsIndexError, TooFewPointsError

DEFAULT_NEIGHBORS = 15
_MIN_KERNEL_WIDTH = 1e-6


class DegenerateKernelWarning(UserWarning):
    """Kernel width collapsed to zero (all points coincide)."""


@dataclass(frozen=True)
class Neighbor:
    index: int
    distance: float


class NeighborIndex:
    """Immutable exact-kNN structure over context vectors.

    Parameters
    ----------
    points : array (n, 19)
        Standardized context vectors; row order is the tie-break order.
    n_neighbors : int
        Neighborhood size used for kernel-width estimation and queries.

    The kernel width is the average, over all points, of the standard
    deviation of each point's ``n_neighbors`` nearest distances
    (self excluded).
    """

    def __init__(self, points, n_neighbors: int = DEFAULT_NEIGHBORS):
        points = check_array(points, dtype=float)
        if points.shape[0] < n_neighbors + 1:
            raise TooFewPointsError(
                f"index needs more than {n_neighbors} points, got {points.shape[0]}"
            )
        self._points = points.copy()
        self._points.setflags(write=False)
        self.n_neighbors = int(n_neighbors)
        self.kernel_width = self._estimate_kernel_width()

    @property
    def points(self) -> np.ndarray:
        return self._points

    def __len__(self) -> int:
        return self._points.shape[0]

    def _distances_from(self, x: np.ndarray) -> np.ndarray:
        diff = self._points - x
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def _estimate_kernel_width(self) -> float:
        n = len(self)
        k = self.n_neighbors
        stds = np.empty(n)
        sq = np.einsum("ij,ij->i", self._points, self._points)
        chunk = max(1, int(4_000_000 // n))
        for s in range(0, n, chunk):
            block = self._points[s : s + chunk]
            d2 = sq[s : s + chunk, None] + sq[None, :] - 2.0 * (block @ self._points.T)
            np.clip(d2, 0.0, None, out=d2)
            rows = np.arange(s, min(s + chunk, n))
            d2[rows - s, rows] = np.inf  # self excluded from own neighborhood
            nearest = np.sqrt(np.partition(d2, k - 1, axis=1)[:, :k])
            stds[s : s + chunk] = nearest.std(axis=1)  # population std
        width = float(stds.mean())
        if width < _MIN_KERNEL_WIDTH:
            warnings.warn(
                "all neighbor distances coincide; flooring kernel width at "
                f"{_MIN_KERNEL_WIDTH}",
                DegenerateKernelWarning,
            )
            width = _MIN_KERNEL_WIDTH
        return width

    def query(self, x, k: int | None = None, exclude: int | None = None) -> list:
        """The k exact nearest points, ascending distance.

        ``exclude`` drops one row (used when the query point itself is a
        member of the index, e.g. during validation).
        """
        k = self.n_neighbors if k is None else int(k)
        available = len(self) - (1 if exclude is not None else 0)
        if k > available:
            raise KExceedsIndexError(f"k={k} exceeds usable index size {available}")
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self._points.shape[1]:
            raise KExceedsIndexError(
                f"query dimension {x.shape[0]} != index dimension {self._points.shape[1]}"
            )
        d = self._distances_from(x)
        if exclude is not None:
            d = d.copy()
            d[exclude] = np.inf
        order = np.argsort(d, kind="stable")[:k]
        return [Neighbor(index=int(i), distance=float(d[i])) for i in order]


def build_index(records, n_neighbors: int = DEFAULT_NEIGHBORS) -> NeighborIndex:
    """Index a record sequence by its (standardized) context vectors."""
    if len(records) < n_neighbors + 1:
        raise TooFewPointsError(
            f"need more than {n_neighbors} records, got {len(records)}"
        )
    cxp = np.array([r.cxp for r in records], dtype=float)
    if cxp.shape[1] != N_CXP:
        raise TooFewPointsError(f"context vectors must have {N_CXP} entries")
    return NeighborIndex(cxp, n_neighbors=n_neighbors)


def gaussian_weight(a, b, kernel_width: float) -> float:
    """exp(-||a - b||^2 / width^2); 1 at distance zero, e^-1 at one width."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    d2 = float(np.sum((a - b) ** 2))
    return float(np.exp(-d2 / kernel_width**2))


def _weights_for(distances: np.ndarray, kernel_width: float) -> np.ndarray:
    return np.exp(-(distances**2) / kernel_width**2)


def baseline_recommend(
    index: NeighborIndex,
    cop_matrix: np.ndarray,
    scores: np.ndarray,
    current_cxp,
    current_cop,
    current_score: float,
    exclude: int | None = None,
):
    """Neighbor-average control recommendation.

    Looks at the ``n_neighbors`` context-nearest historic points, keeps
    those whose optimality beats the current one, and averages their
    control offsets with Gaussian distance weights. The divisor stays at
    the full neighborhood size even when the score filter removes terms.

    Returns (5-vector of control deltas, no_improvement flag).
    """
    cop_matrix = np.asarray(cop_matrix, dtype=float)
    scores = np.asarray(scores, dtype=float)
    current_cop = np.asarray(current_cop, dtype=float).reshape(-1)
    if cop_matrix.shape != (len(index), N_COP):
        raise TooFewPointsError("control matrix must align with the index")
    neighbors = index.query(current_cxp, k=index.n_neighbors, exclude=exclude)
    total = np.zeros(N_COP)
    survivors = 0
    for nb in neighbors:
        if scores[nb.index] > current_score:
            w = float(np.exp(-(nb.distance**2) / index.kernel_width**2))
            total += w * (cop_matrix[nb.index] - current_cop)
            survivors += 1
    if survivors == 0:
        return np.zeros(N_COP), True
    return total / index.n_neighbors, False
