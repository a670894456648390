"""Boring-efficiency score: reward advance rate, penalize working pressure.

The score is linear in the advance rate and piecewise-linear in the
working pressure: once the pressure exceeds the per-ground-class margin
bound, the penalty slope steepens so that the operator is pushed to keep
a safety margin below the shutdown threshold. A display mapping rescales
the raw score to 0-100 against the historic best/worst.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .domain import SCHEMA_VERSION, GroundClass, OptimalityConfig
from .errors import InsufficientDataError, InvalidConfigError


def percentile(values, q) -> float:
    """Order-statistic percentile: smallest sample >= the q-quantile cut.

    Always returns an actual sample value, which keeps fitted bounds
    reproducible across library versions.
    """
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InsufficientDataError("percentile of empty sample")
    return float(np.percentile(arr, q, method="higher"))


def raw_score(ar: float, wp: float, cfg: OptimalityConfig) -> float:
    """Raw (pre-normalization) optimality of one (AR, WP) observation.

    Below the margin bound the pressure penalty has slope
    ``penalty_below``; above it, the margin-bound penalty is locked in and
    the excess is charged at ``penalty_above``. Continuous at the bound.
    """
    if ar < 0 or wp < 0:
        raise InvalidConfigError(f"ar and wp must be >= 0, got {ar}, {wp}")
    gain = ar / cfg.max_advance_rate
    if wp <= cfg.margin_bound:
        return gain - cfg.penalty_below * wp / cfg.shutdown_pressure
    return (
        gain
        - cfg.penalty_below * cfg.margin_bound / cfg.shutdown_pressure
        - cfg.penalty_above * (wp - cfg.margin_bound) / cfg.shutdown_pressure
    )


def raw_scores(ar: np.ndarray, wp: np.ndarray, cfg: OptimalityConfig) -> np.ndarray:
    """Vectorized :func:`raw_score` over aligned AR/WP arrays."""
    ar = np.asarray(ar, dtype=float)
    wp = np.asarray(wp, dtype=float)
    gain = ar / cfg.max_advance_rate
    below = gain - cfg.penalty_below * wp / cfg.shutdown_pressure
    above = (
        gain
        - cfg.penalty_below * cfg.margin_bound / cfg.shutdown_pressure
        - cfg.penalty_above * (wp - cfg.margin_bound) / cfg.shutdown_pressure
    )
    return np.where(wp <= cfg.margin_bound, below, above)


def normalize(raw: float, cfg: OptimalityConfig) -> float:
    """Map a raw score onto the 0-100 display scale, clipped at both ends."""
    span = cfg.norm_max - cfg.norm_min
    value = 100.0 * (raw - cfg.norm_min) / span
    return float(min(100.0, max(0.0, value)))


def fit_config(
    records,
    ground_class: GroundClass,
    penalty_below: float = 0.8,
    penalty_above: float = 3.0,
    shutdown_pressure: float = 150.0,
) -> OptimalityConfig:
    """Fit the per-class score parameters from observed data.

    The margin bound is the 90th percentile of the observed working
    pressure, the advance-rate normalizer is the observed maximum, and
    the display bounds are the min/max raw score over the same records.
    """
    records = [r for r in records if r.ground_class == ground_class]
    if len(records) < 10:
        raise InsufficientDataError(
            f"need >= 10 records for {ground_class.value}, got {len(records)}"
        )
    wp = np.array([r.working_pressure for r in records])
    ar = np.array([r.advance_rate for r in records])
    margin_bound = percentile(wp, 90)
    margin_bound = min(margin_bound, shutdown_pressure)
    max_advance_rate = float(ar.max())
    if max_advance_rate <= 0:
        raise InsufficientDataError("all advance rates are zero; cannot normalize")
    probe = OptimalityConfig(
        ground_class=ground_class,
        penalty_below=penalty_below,
        penalty_above=penalty_above,
        margin_bound=margin_bound,
        max_advance_rate=max_advance_rate,
        shutdown_pressure=shutdown_pressure,
        norm_min=-1.0,
        norm_max=1.0,
    )
    scores = raw_scores(ar, wp, probe)
    norm_min = float(scores.min())
    norm_max = float(scores.max())
    if norm_min == norm_max:
        # constant corpus; widen so the display mapping stays defined
        norm_min -= 0.5
        norm_max += 0.5
    return OptimalityConfig(
        ground_class=ground_class,
        penalty_below=penalty_below,
        penalty_above=penalty_above,
        margin_bound=margin_bound,
        max_advance_rate=max_advance_rate,
        shutdown_pressure=shutdown_pressure,
        norm_min=norm_min,
        norm_max=norm_max,
    )


def save_config(cfg: OptimalityConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def load_config(path) -> OptimalityConfig:
    d = json.loads(Path(path).read_text())
    if d.get("schema_version") != SCHEMA_VERSION:
        raise InvalidConfigError(
            f"unsupported schema_version {d.get('schema_version')!r} in {path}"
        )
    return OptimalityConfig.from_dict(d)
