"""Core data types shared by every other module.

All types are immutable after construction and carry no behavior beyond
construction-time validation and JSON round-tripping.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ArityMismatchError,
    InvalidConfigError,
    NegativeMeasureError,
    NonFiniteError,
    UnknownGroundClassError,
)

SCHEMA_VERSION = 1

N_COP = 5
N_CXP = 19
N_FEATURES = N_COP + N_CXP


class GroundClass(enum.Enum):
    """Broad geology categories; one model is trained per class."""

    GC1 = "GC1"
    GC2 = "GC2"
    GC3 = "GC3"

    @property
    def description(self) -> str:
        return _GC_DESCRIPTIONS[self]

    @classmethod
    def parse(cls, label: str) -> "GroundClass":
        try:
            return cls(label)
        except ValueError:
            raise UnknownGroundClassError(
                f"unknown ground class {label!r}; expected one of GC1, GC2, GC3"
            ) from None


_GC_DESCRIPTIONS = {
    GroundClass.GC1: "homogeneous highly weathered schist (soft)",
    GroundClass.GC2: "homogeneous moderately weathered schist (firm)",
    GroundClass.GC3: "homogeneous slightly weathered schist (hard)",
}


@dataclass(frozen=True)
class SensorRecord:
    """One timestamped sample of the drive log.

    ``cop`` holds the 5 operator-controlled setpoints, ``cxp`` the 19
    context channels in the fixed schema order. Values are stored as
    tuples so records are hashable and structurally comparable.
    """

    timestamp: float
    tunnel_length: float
    advance_rate: float
    working_pressure: float
    cop: tuple
    cxp: tuple
    ground_class: GroundClass

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "tunnel_length": self.tunnel_length,
            "advance_rate": self.advance_rate,
            "working_pressure": self.working_pressure,
            "cop": list(self.cop),
            "cxp": list(self.cxp),
            "ground_class": self.ground_class.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SensorRecord":
        return validate_record(
            timestamp=d["timestamp"],
            tunnel_length=d["tunnel_length"],
            advance_rate=d["advance_rate"],
            working_pressure=d["working_pressure"],
            cop=d["cop"],
            cxp=d["cxp"],
            ground_class=GroundClass.parse(d["ground_class"]),
        )


def validate_record(
    timestamp,
    tunnel_length,
    advance_rate,
    working_pressure,
    cop,
    cxp,
    ground_class,
) -> SensorRecord:
    """Build a SensorRecord, enforcing all of its invariants.

    Raises ArityMismatchError, NonFiniteError or NegativeMeasureError on
    malformed input; returns a well-formed immutable record otherwise.
    """
    cop = tuple(float(v) for v in cop)
    cxp = tuple(float(v) for v in cxp)
    if len(cop) != N_COP:
        raise ArityMismatchError(f"cop must have {N_COP} entries, got {len(cop)}")
    if len(cxp) != N_CXP:
        raise ArityMismatchError(f"cxp must have {N_CXP} entries, got {len(cxp)}")
    scalars = {
        "timestamp": float(timestamp),
        "tunnel_length": float(tunnel_length),
        "advance_rate": float(advance_rate),
        "working_pressure": float(working_pressure),
    }
    for name, value in scalars.items():
        if not math.isfinite(value):
            raise NonFiniteError(f"{name} is not finite: {value!r}")
    for name, vec in (("cop", cop), ("cxp", cxp)):
        if not all(math.isfinite(v) for v in vec):
            raise NonFiniteError(f"{name} contains a non-finite entry: {vec}")
    if scalars["advance_rate"] < 0:
        raise NegativeMeasureError(f"advance_rate < 0: {scalars['advance_rate']}")
    if scalars["working_pressure"] < 0:
        raise NegativeMeasureError(
            f"working_pressure < 0: {scalars['working_pressure']}"
        )
    if not isinstance(ground_class, GroundClass):
        ground_class = GroundClass.parse(str(ground_class))
    return SensorRecord(
        timestamp=scalars["timestamp"],
        tunnel_length=scalars["tunnel_length"],
        advance_rate=scalars["advance_rate"],
        working_pressure=scalars["working_pressure"],
        cop=cop,
        cxp=cxp,
        ground_class=ground_class,
    )


@dataclass(frozen=True)
class OptimalityConfig:
    """Per-ground-class parameters of the optimality score.

    ``penalty_below``/``penalty_above`` weight the working-pressure term
    below/above the margin bound; the score is display-normalized with
    ``norm_min``/``norm_max``.
    """

    ground_class: GroundClass
    penalty_below: float       # weight on WP while below the margin bound
    penalty_above: float       # steeper weight once WP exceeds the margin bound
    margin_bound: float        # bar; start of the heavily penalized band
    max_advance_rate: float    # mm/min; best AR observed for this class
    shutdown_pressure: float   # bar; machine trips out above this
    norm_min: float
    norm_max: float

    def __post_init__(self):
        if self.penalty_below < 0:
            raise InvalidConfigError(f"penalty_below must be >= 0, got {self.penalty_below}")
        if self.penalty_above < self.penalty_below:
            raise InvalidConfigError(
                f"penalty_above ({self.penalty_above}) must be >= penalty_below "
                f"({self.penalty_below})"
            )
        if not (0 < self.margin_bound <= self.shutdown_pressure):
            raise InvalidConfigError(
                f"need 0 < margin_bound <= shutdown_pressure, got "
                f"{self.margin_bound} / {self.shutdown_pressure}"
            )
        if self.max_advance_rate <= 0:
            raise InvalidConfigError(
                f"max_advance_rate must be > 0, got {self.max_advance_rate}"
            )
        if not self.norm_min < self.norm_max:
            raise InvalidConfigError(
                f"need norm_min < norm_max, got {self.norm_min} / {self.norm_max}"
            )

    def to_dict(self) -> dict:
        # external JSON schema keys
        return {
            "schema_version": SCHEMA_VERSION,
            "ground_class": self.ground_class.value,
            "w1": self.penalty_below,
            "w2": self.penalty_above,
            "mb": self.margin_bound,
            "mar": self.max_advance_rate,
            "ub": self.shutdown_pressure,
            "norm_min": self.norm_min,
            "norm_max": self.norm_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OptimalityConfig":
        return cls(
            ground_class=GroundClass.parse(d["ground_class"]),
            penalty_below=float(d["w1"]),
            penalty_above=float(d["w2"]),
            margin_bound=float(d["mb"]),
            max_advance_rate=float(d["mar"]),
            shutdown_pressure=float(d["ub"]),
            norm_min=float(d["norm_min"]),
            norm_max=float(d["norm_max"]),
        )


@dataclass(frozen=True)
class FeatureScaler:
    """Per-feature mean/std fitted on the training corpus (population std)."""

    mean: tuple
    std: tuple

    def __post_init__(self):
        if len(self.mean) != len(self.std):
            raise ArityMismatchError("mean and std must have equal length")
        if any(s <= 0 for s in self.std):
            raise InvalidConfigError("feature stds must be strictly positive")

    @property
    def mean_array(self) -> np.ndarray:
        return np.asarray(self.mean, dtype=float)

    @property
    def std_array(self) -> np.ndarray:
        return np.asarray(self.std, dtype=float)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean_array) / self.std_array

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x, dtype=float) * self.std_array + self.mean_array

    def to_dict(self) -> dict:
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureScaler":
        return cls(mean=tuple(d["mean"]), std=tuple(d["std"]))


@dataclass(frozen=True)
class MlpModel:
    """Frozen feed-forward network weights plus everything needed to use them.

    Hidden layers use the logistic sigmoid; the output unit is linear.
    ``weights[i]`` has shape (layer_sizes[i], layer_sizes[i+1]); biases are
    row vectors. The scaler maps raw (cop, cxp) features into the
    standardized space the network was trained in.
    """

    layer_sizes: tuple
    weights: tuple          # tuple of 2-d ndarrays
    biases: tuple           # tuple of 1-d ndarrays
    feature_scaler: FeatureScaler
    ground_class: GroundClass
    train_config: dict = field(default_factory=dict)
    corpus_fingerprint: str = ""
    calibration: "CredibilityCalibration | None" = None

    def __post_init__(self):
        if self.layer_sizes[-1] != 1:
            raise InvalidConfigError("output layer must have exactly one unit")
        if len(self.weights) != len(self.layer_sizes) - 1:
            raise InvalidConfigError("one weight matrix required per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expect = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expect:
                raise InvalidConfigError(
                    f"weight {i} has shape {w.shape}, expected {expect}"
                )
            if b.shape != (self.layer_sizes[i + 1],):
                raise InvalidConfigError(f"bias {i} has shape {b.shape}")

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "arch": list(self.layer_sizes),
            "activation": "sigmoid",
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
            "feature_scaler": self.feature_scaler.to_dict(),
            "ground_class": self.ground_class.value,
            "train_config": dict(self.train_config),
            "corpus_fingerprint": self.corpus_fingerprint,
            "calibration": self.calibration.to_dict() if self.calibration else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MlpModel":
        calib = d.get("calibration")
        return cls(
            layer_sizes=tuple(d["arch"]),
            weights=tuple(np.asarray(w, dtype=float) for w in d["weights"]),
            biases=tuple(np.asarray(b, dtype=float) for b in d["biases"]),
            feature_scaler=FeatureScaler.from_dict(d["feature_scaler"]),
            ground_class=GroundClass.parse(d["ground_class"]),
            train_config=dict(d.get("train_config", {})),
            corpus_fingerprint=d.get("corpus_fingerprint", ""),
            calibration=CredibilityCalibration.from_dict(calib) if calib else None,
        )


@dataclass(frozen=True)
class CredibilityCalibration:
    """5th/95th percentiles of the two neighbor error metrics on the
    validation split; used to normalize errors into [0, 1]."""

    q5: tuple   # (prediction error Q5, trend error Q5)
    q95: tuple

    def __post_init__(self):
        if len(self.q5) != 2 or len(self.q95) != 2:
            raise ArityMismatchError("calibration holds exactly two metrics")
        if any(lo > hi for lo, hi in zip(self.q5, self.q95)):
            raise InvalidConfigError("Q5 must not exceed Q95")

    def to_dict(self) -> dict:
        return {"q5": list(self.q5), "q95": list(self.q95)}

    @classmethod
    def from_dict(cls, d: dict) -> "CredibilityCalibration":
        return cls(q5=tuple(d["q5"]), q95=tuple(d["q95"]))


@dataclass(frozen=True)
class Recommendation:
    """One incremental control adjustment suggested to the operator.

    ``gradients`` live in the standardized feature space; ``deltas`` are
    the same directions converted to raw control units (and possibly
    clamped). ``at_bound`` lists control indices whose delta was clamped
    to zero at a configured box edge.
    """

    gradients: tuple
    deltas: tuple
    predicted_optimality: float
    credibility: float
    ground_class: GroundClass
    at_bound: tuple = ()
    no_improvement: bool = False

    def __post_init__(self):
        if len(self.gradients) != N_COP or len(self.deltas) != N_COP:
            raise ArityMismatchError("gradients and deltas must have 5 entries")
        if not all(math.isfinite(v) for v in self.deltas):
            raise NonFiniteError("deltas contain a non-finite entry")
        if not (0.0 <= self.credibility <= 1.0):
            raise InvalidConfigError(
                f"credibility must lie in [0, 1], got {self.credibility}"
            )
        for g, d in zip(self.gradients, self.deltas):
            if d != 0.0 and math.copysign(1.0, d) != math.copysign(1.0, g):
                raise InvalidConfigError(
                    "each nonzero delta must share its gradient's sign"
                )

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "gradients": list(self.gradients),
            "deltas": list(self.deltas),
            "predicted_optimality": self.predicted_optimality,
            "credibility": self.credibility,
            "ground_class": self.ground_class.value,
            "at_bound": list(self.at_bound),
            "no_improvement": self.no_improvement,
        }


@dataclass(frozen=True)
class ValidationCell:
    """Counters for one (ground class, control parameter) table cell."""

    valid: int
    total: int

    @property
    def ratio(self):
        """valid/total, or None when no case was counted."""
        if self.total == 0:
            return None
        return self.valid / self.total


@dataclass(frozen=True)
class ValidationReport:
    """Synchronized/contextual validation ratios per ground class and CoP.

    ``sync`` and ``contextual`` map GroundClass -> tuple of 5 cells.
    Averages are recomputed from the cells on access so they can never
    drift from the counters.
    """

    recommender: str
    sync: dict
    contextual: dict

    @staticmethod
    def _avg(ratios):
        defined = [r for r in ratios if r is not None]
        if not defined:
            return None
        return sum(defined) / len(defined)

    def row_average(self, kind: str, gc: GroundClass):
        cells = getattr(self, kind)[gc]
        return self._avg([c.ratio for c in cells])

    def column_average(self, kind: str, cop_index: int):
        table = getattr(self, kind)
        return self._avg([cells[cop_index].ratio for cells in table.values()])

    def grand_average(self, kind: str):
        table = getattr(self, kind)
        return self._avg([c.ratio for cells in table.values() for c in cells])

    def to_dict(self) -> dict:
        def table(kind):
            out = {}
            for gc, cells in getattr(self, kind).items():
                out[gc.value] = {
                    "cells": [
                        {"valid": c.valid, "total": c.total, "ratio": c.ratio}
                        for c in cells
                    ],
                    "row_average": self.row_average(kind, gc),
                }
            return out

        return {
            "schema_version": SCHEMA_VERSION,
            "recommender": self.recommender,
            "synchronized": table("sync"),
            "contextual": table("contextual"),
            "column_averages": {
                "synchronized": [self.column_average("sync", j) for j in range(N_COP)],
                "contextual": [self.column_average("contextual", j) for j in range(N_COP)],
            },
            "grand_averages": {
                "synchronized": self.grand_average("sync"),
                "contextual": self.grand_average("contextual"),
            },
        }
