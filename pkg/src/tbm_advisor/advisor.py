"""Recommendation engine: per-ground-class model registry and the
gradient-step advisory, plus the recommender adapters used by the
validation harness.

Live path: standardize the operating point with the model's scaler, take
the exact input gradient over the five control slots, scale it into a
small raw-unit step, annotate with the display-normalized predicted score
and the neighborhood credibility.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .credibility import CredibilityScorer, successor_deltas
from .domain import (
    N_COP,
    GroundClass,
    MlpModel,
    OptimalityConfig,
    Recommendation,
)
from .errors import (
    FingerprintMismatchError,
    MissingModelError,
    ModelNotLoadedError,
)
from .ingest import load_csv, records_to_arrays
from .mlp import FeedForwardRegressor, load_model
from .neighbors import NeighborIndex, baseline_recommend, build_index
from .optimality import load_config, normalize, raw_scores

DEFAULT_STEP_SCALE = 0.1  # standardized units per recommendation step

CORPUS_FILE = "corpus.csv"
STATS_FILE = "feature_stats.json"


def corpus_fingerprint(path) -> str:
    """Stable identity of a processed corpus file."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


@dataclass
class RegistryEntry:
    """Everything needed to advise within one ground class."""

    model: MlpModel
    estimator: FeedForwardRegressor
    optimality: OptimalityConfig
    index: NeighborIndex
    scorer: CredibilityScorer
    features: np.ndarray      # standardized (n, 24)
    cop_matrix: np.ndarray    # standardized controls (n, 5)
    scores: np.ndarray        # raw optimality per corpus record


class Registry:
    """Immutable snapshot of models, configs and neighbor structures."""

    def __init__(self, entries: dict):
        self._entries = dict(entries)

    @property
    def ground_classes(self):
        return sorted(self._entries, key=lambda gc: gc.value)

    def entry(self, gc: GroundClass) -> RegistryEntry:
        if gc not in self._entries:
            raise ModelNotLoadedError(f"no model loaded for {gc.value}")
        return self._entries[gc]

    def describe(self) -> dict:
        out = {}
        for gc in self.ground_classes:
            e = self._entries[gc]
            out[gc.value] = {
                "arch": list(e.model.layer_sizes),
                "corpus_fingerprint": e.model.corpus_fingerprint,
                "corpus_size": int(len(e.scores)),
                "calibration": e.model.calibration.to_dict()
                if e.model.calibration
                else None,
                "optimality": e.optimality.to_dict(),
            }
        return out


def load_registry(model_dir, corpus_dir=None, verify_fingerprint: bool = True) -> Registry:
    """Load per-class models + configs and rebuild neighbor structures.

    The neighbor corpus defaults to files co-located with the models.
    Each model records the fingerprint of the corpus it was trained on;
    a mismatch with the supplied corpus aborts the load.
    """
    model_dir = Path(model_dir)
    corpus_dir = Path(corpus_dir) if corpus_dir else model_dir
    corpus_path = corpus_dir / CORPUS_FILE
    if not corpus_path.exists():
        raise MissingModelError(f"corpus file not found: {corpus_path}")
    fingerprint = corpus_fingerprint(corpus_path)
    records = load_csv(corpus_path)

    entries = {}
    for gc in GroundClass:
        model_path = model_dir / f"model_{gc.value}.json"
        optimality_path = model_dir / f"optimality_{gc.value}.json"
        if not model_path.exists():
            raise MissingModelError(f"missing model file {model_path}", ground_class=gc)
        if not optimality_path.exists():
            raise MissingModelError(
                f"missing optimality config {optimality_path}", ground_class=gc
            )
        model = load_model(model_path)
        if verify_fingerprint and model.corpus_fingerprint != fingerprint:
            raise FingerprintMismatchError(
                f"{model_path} was trained on corpus {model.corpus_fingerprint[:12]}..., "
                f"but {corpus_path} has fingerprint {fingerprint[:12]}..."
            )
        cfg = load_config(optimality_path)
        subset = [r for r in records if r.ground_class == gc]
        entries[gc] = _build_entry(model, cfg, subset)
    return Registry(entries)


def _build_entry(model: MlpModel, cfg: OptimalityConfig, records) -> RegistryEntry:
    arrays = records_to_arrays(records)
    features = np.hstack([arrays["cop"], arrays["cxp"]])
    scores = raw_scores(arrays["advance_rate"], arrays["working_pressure"], cfg)
    estimator = FeedForwardRegressor.from_model(model)
    index = build_index(records)
    eligible, dcop, dy = successor_deltas(records, scores)
    scorer = CredibilityScorer(
        index,
        estimator,
        model.calibration,
        features,
        scores,
        eligible,
        dcop,
        dy,
    )
    return RegistryEntry(
        model=model,
        estimator=estimator,
        optimality=cfg,
        index=index,
        scorer=scorer,
        features=features,
        cop_matrix=arrays["cop"],
        scores=scores,
    )


def gradient_step(entry: RegistryEntry, cop_raw, cxp_raw, step_scale: float = DEFAULT_STEP_SCALE):
    """Gradient path only (no neighbor search); O(1) in corpus size.

    Returns (gradients over the 5 control slots in standardized space,
    deltas in raw units, predicted raw score, standardized features).
    """
    x_raw = np.concatenate([np.asarray(cop_raw, float), np.asarray(cxp_raw, float)])
    scaler = entry.model.feature_scaler
    x = scaler.transform(x_raw)
    grad = entry.estimator.input_gradient(x)[:N_COP]
    deltas = step_scale * grad * scaler.std_array[:N_COP]
    pred = entry.estimator.predict(x)
    return grad, deltas, pred, x


def recommend(
    registry: Registry,
    gc: GroundClass,
    cop_raw,
    cxp_raw,
    step_scale: float = DEFAULT_STEP_SCALE,
    bounds=None,
) -> Recommendation:
    """Advisory for one operating point.

    ``bounds``, when given, is a (low, high) pair of 5-vectors clamping
    the post-step controls; a control already at its bound with the
    gradient pointing outward gets a zero delta and an ``at_bound`` flag.
    """
    entry = registry.entry(gc)
    grad, deltas, pred, x = gradient_step(entry, cop_raw, cxp_raw, step_scale)
    at_bound = []
    if bounds is not None:
        low = np.asarray(bounds[0], dtype=float)
        high = np.asarray(bounds[1], dtype=float)
        cop = np.asarray(cop_raw, dtype=float)
        clamped = np.clip(cop + deltas, low, high) - cop
        for j in range(N_COP):
            if deltas[j] != 0.0 and clamped[j] * deltas[j] <= 0.0:
                # clamp removed (or flipped) the step: hold this control
                clamped[j] = 0.0
                at_bound.append(j)
        deltas = clamped
    credibility_value = entry.scorer.score(x[N_COP:])
    return Recommendation(
        gradients=tuple(float(g) for g in grad),
        deltas=tuple(float(d) for d in deltas),
        predicted_optimality=normalize(pred, entry.optimality),
        credibility=float(min(1.0, max(0.0, credibility_value))),
        ground_class=gc,
        at_bound=tuple(at_bound),
    )


# --- recommender adapters for the validation harness ---------------------------
#
# Validation corpora are already standardized, so these adapters work in
# standardized units end to end: rec(i) is the suggested control delta at
# corpus position i.


class GradientRecommender:
    """Input-gradient step on a frozen model (standardized units)."""

    name = "GB"

    def __init__(self, estimator: FeedForwardRegressor, features: np.ndarray,
                 step_scale: float = DEFAULT_STEP_SCALE):
        self.estimator = estimator
        self.features = np.asarray(features, dtype=float)
        self.step_scale = step_scale

    def __call__(self, i: int) -> np.ndarray:
        grad = self.estimator.input_gradient(self.features[i])[:N_COP]
        return self.step_scale * grad


class BaselineNeighborRecommender:
    """Gaussian-weighted average of better-scoring neighbor controls."""

    name = "NN"

    def __init__(self, index: NeighborIndex, cop_matrix, scores, cxp_matrix):
        self.index = index
        self.cop_matrix = np.asarray(cop_matrix, dtype=float)
        self.scores = np.asarray(scores, dtype=float)
        self.cxp_matrix = np.asarray(cxp_matrix, dtype=float)

    def __call__(self, i: int) -> np.ndarray:
        deltas, _ = baseline_recommend(
            self.index,
            self.cop_matrix,
            self.scores,
            self.cxp_matrix[i],
            self.cop_matrix[i],
            float(self.scores[i]),
            exclude=i,
        )
        return deltas


class RandomSignRecommender:
    """Null reference: seeded coin-flip direction per control."""

    name = "RND"

    def __init__(self, n: int, seed: int = 0, magnitude: float = 0.1):
        rng = np.random.default_rng(seed)
        self.signs = rng.choice([-1.0, 1.0], size=(n, N_COP)) * magnitude

    def __call__(self, i: int) -> np.ndarray:
        return self.signs[i]


class ReplayRecommender:
    """Upper reference: replays the operator's own next change."""

    name = "REPLAY"

    def __init__(self, cop_matrix):
        self.cop_matrix = np.asarray(cop_matrix, dtype=float)

    def __call__(self, i: int) -> np.ndarray:
        if i + 1 >= len(self.cop_matrix):
            return np.zeros(N_COP)
        return self.cop_matrix[i + 1] - self.cop_matrix[i]
