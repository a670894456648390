"""Synthetic drive generator: desk-scale stand-in for proprietary logs.

A fixed smooth family maps (controls, context, ground class) to the true
advance rate and working pressure; an operator policy holds setpoints
constant with occasional step changes. Everything is driven by one seed,
so drives are exactly reproducible and the generating functions can serve
as test oracles.

Generating family (controls scaled to c = cop/10, hardness h per class):
    AR = (30 / h) * sigmoid(1.8 c1 + 0.8 c2 + 1.6 c4 - 0.9 c5 + 0.6 tanh(cxp_1) - 1.2)
    WP = h * (25 + 60 c4 + 25 c1 + 10 tanh(cxp_2))
Soft ground (GC1) bores fast at low pressure; hard ground (GC3) is the
opposite. The third control deliberately has no effect, and pushing
thrust/cutter speed trades advance rate against pressure, so the score
has a nontrivial interior optimum.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import N_COP, N_CXP, SCHEMA_VERSION, GroundClass, SensorRecord, validate_record
from .errors import InvalidSpecError, SessionClosedError

COP_LOW = 0.0
COP_HIGH = 10.0

_HARDNESS = {GroundClass.GC1: 0.8, GroundClass.GC2: 1.0, GroundClass.GC3: 1.25}
_BASE_MAX_AR = 30.0  # mm/min before hardness scaling


@dataclass(frozen=True)
class OperatorPolicy:
    """Piecewise-constant setpoints with occasional seeded step changes."""

    action_probability: float = 0.02
    step_scale: float = 1.0
    jump_probability: float = 0.25

    def to_dict(self) -> dict:
        return {
            "action_probability": self.action_probability,
            "step_scale": self.step_scale,
            "jump_probability": self.jump_probability,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OperatorPolicy":
        return cls(**d)


@dataclass(frozen=True)
class SegmentSpec:
    ground_class: GroundClass
    n_samples: int

    def to_dict(self) -> dict:
        return {"ground_class": self.ground_class.value, "n_samples": self.n_samples}

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentSpec":
        return cls(GroundClass.parse(d["ground_class"]), int(d["n_samples"]))


@dataclass(frozen=True)
class DriveSpec:
    segments: tuple
    noise_std: float = 0.0
    seed: int = 0
    tick_seconds: float = 10.0
    policy: OperatorPolicy = field(default_factory=OperatorPolicy)

    def __post_init__(self):
        if not self.segments:
            raise InvalidSpecError("drive spec needs at least one geology segment")
        if any(s.n_samples <= 0 for s in self.segments):
            raise InvalidSpecError("segment sample counts must be positive")
        if self.noise_std < 0:
            raise InvalidSpecError("noise_std must be >= 0")
        if self.tick_seconds <= 0:
            raise InvalidSpecError("tick_seconds must be > 0")

    @property
    def total_samples(self) -> int:
        return sum(s.n_samples for s in self.segments)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "segments": [s.to_dict() for s in self.segments],
            "noise_std": self.noise_std,
            "seed": self.seed,
            "tick_seconds": self.tick_seconds,
            "policy": self.policy.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DriveSpec":
        return cls(
            segments=tuple(SegmentSpec.from_dict(s) for s in d["segments"]),
            noise_std=float(d.get("noise_std", 0.0)),
            seed=int(d.get("seed", 0)),
            tick_seconds=float(d.get("tick_seconds", 10.0)),
            policy=OperatorPolicy.from_dict(d.get("policy", {})),
        )


def load_spec(path) -> DriveSpec:
    return DriveSpec.from_dict(json.loads(Path(path).read_text()))


def save_spec(spec: DriveSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2, sort_keys=True) + "\n")


class GroundTruth:
    """Noise-free generating functions; the oracle for acceptance checks."""

    @staticmethod
    def advance_rate(cop, cxp, gc: GroundClass) -> float:
        c = np.asarray(cop, dtype=float) / COP_HIGH
        ctx = math.tanh(float(np.asarray(cxp, dtype=float)[0]))
        h = _HARDNESS[gc]
        u = 1.8 * c[0] + 0.8 * c[1] + 1.6 * c[3] - 0.9 * c[4] + 0.6 * ctx - 1.2
        return (_BASE_MAX_AR / h) / (1.0 + math.exp(-u))

    @staticmethod
    def working_pressure(cop, cxp, gc: GroundClass) -> float:
        c = np.asarray(cop, dtype=float) / COP_HIGH
        ctx = math.tanh(float(np.asarray(cxp, dtype=float)[1]))
        h = _HARDNESS[gc]
        return h * (25.0 + 60.0 * c[3] + 25.0 * c[0] + 10.0 * ctx)


_PATH_GEOMETRY_SEED = 170  # versioned: fixes amplitudes/periods across drives


class _ContextPaths:
    """Smooth deterministic context trajectories (two sinusoids per channel).

    Amplitudes, periods and offsets are fixed constants shared by every
    drive, so independently seeded drives sample the same context
    distribution (seeds only shift the phases). Without this, a model
    trained on one drive would face covariate shift on any other.
    """

    def __init__(self, rng: np.random.Generator):
        geometry = np.random.default_rng(_PATH_GEOMETRY_SEED)
        self.amp1 = geometry.uniform(0.4, 1.0, N_CXP)
        self.amp2 = geometry.uniform(0.1, 0.5, N_CXP)
        self.period1 = geometry.uniform(800.0, 4000.0, N_CXP)
        self.period2 = geometry.uniform(150.0, 700.0, N_CXP)
        self.offset = geometry.uniform(-0.3, 0.3, N_CXP)
        self.phase1 = rng.uniform(0.0, 2.0 * np.pi, N_CXP)
        self.phase2 = rng.uniform(0.0, 2.0 * np.pi, N_CXP)

    def at(self, t: float) -> np.ndarray:
        return (
            self.offset
            + self.amp1 * np.sin(2.0 * np.pi * t / self.period1 + self.phase1)
            + self.amp2 * np.sin(2.0 * np.pi * t / self.period2 + self.phase2)
        )


class SimSession:
    """Stateful tick-by-tick simulator (one owner per session).

    The caller supplies control overrides per step; geology follows the
    spec's segment layout. ``step`` raises SessionClosedError once
    ``close`` was called or the drive ran out of segments.
    """

    def __init__(self, spec: DriveSpec):
        self.spec = spec
        seeds = np.random.SeedSequence(spec.seed).spawn(3)
        self._rng_paths = np.random.default_rng(seeds[0])
        self._rng_noise = np.random.default_rng(seeds[1])
        self._rng_policy = np.random.default_rng(seeds[2])
        self._paths = _ContextPaths(self._rng_paths)
        self._gc_by_tick = []
        for seg in spec.segments:
            self._gc_by_tick.extend([seg.ground_class] * seg.n_samples)
        self._tick = 0
        self._tunnel_length = 0.0
        self._closed = False
        self.cop = self._rng_policy.uniform(COP_LOW, COP_HIGH, N_COP)
        self.truth = GroundTruth()

    @property
    def exhausted(self) -> bool:
        return self._tick >= len(self._gc_by_tick)

    @property
    def ground_class(self) -> GroundClass:
        idx = min(self._tick, len(self._gc_by_tick) - 1)
        return self._gc_by_tick[idx]

    def close(self) -> None:
        self._closed = True

    def policy_action(self):
        """Sample the operator policy for this tick.

        Returns (cop vector, acted control index or None). Drawn from the
        policy RNG stream, so generate_drive and an interactive session
        with identical overrides produce identical traces.
        """
        pol = self.spec.policy
        cop = self.cop.copy()
        acted = None
        if self._rng_policy.random() < pol.action_probability:
            j = int(self._rng_policy.integers(N_COP))
            if self._rng_policy.random() < pol.jump_probability:
                cop[j] = self._rng_policy.uniform(COP_LOW, COP_HIGH)
            else:
                size = self._rng_policy.uniform(0.5, 1.5) * pol.step_scale
                sign = 1.0 if self._rng_policy.random() < 0.5 else -1.0
                cop[j] = float(np.clip(cop[j] + sign * size, COP_LOW, COP_HIGH))
            acted = j
        return cop, acted

    def step(self, cop_override=None) -> SensorRecord:
        """Advance one tick applying the given controls (default: hold)."""
        if self._closed:
            raise SessionClosedError("session is closed")
        if self.exhausted:
            raise SessionClosedError("drive specification exhausted")
        if cop_override is not None:
            cop = np.clip(np.asarray(cop_override, dtype=float), COP_LOW, COP_HIGH)
            if cop.shape != (N_COP,):
                raise InvalidSpecError("control override must have 5 entries")
            self.cop = cop
        gc = self._gc_by_tick[self._tick]
        t = self._tick * self.spec.tick_seconds
        cxp = self._paths.at(t)
        ar = GroundTruth.advance_rate(self.cop, cxp, gc)
        wp = GroundTruth.working_pressure(self.cop, cxp, gc)
        if self.spec.noise_std > 0:
            ar = max(0.0, ar + self._rng_noise.normal(0.0, self.spec.noise_std))
            wp = max(0.0, wp + self._rng_noise.normal(0.0, 4.0 * self.spec.noise_std))
        self._tunnel_length += ar * self.spec.tick_seconds / 60.0 / 1000.0
        record = validate_record(
            timestamp=t,
            tunnel_length=self._tunnel_length,
            advance_rate=ar,
            working_pressure=wp,
            cop=self.cop,
            cxp=cxp,
            ground_class=gc,
        )
        self._tick += 1
        return record


@dataclass(frozen=True)
class DriveResult:
    records: tuple
    actions: tuple          # (timestamp, control index) pairs, ground truth
    truth: GroundTruth
    spec: DriveSpec


def generate_drive(spec: DriveSpec) -> DriveResult:
    """Run the operator policy through a session for the whole drive."""
    session = SimSession(spec)
    records = []
    actions = []
    while not session.exhausted:
        cop, acted = session.policy_action()
        record = session.step(cop)
        if acted is not None:
            actions.append((record.timestamp, acted))
        records.append(record)
    return DriveResult(
        records=tuple(records),
        actions=tuple(actions),
        truth=session.truth,
        spec=spec,
    )


def true_raw_score(truth: GroundTruth, cop, cxp, gc: GroundClass, cfg) -> float:
    """Noise-free generator optimality under a fitted score config."""
    from .optimality import raw_score

    ar = truth.advance_rate(cop, cxp, gc)
    wp = truth.working_pressure(cop, cxp, gc)
    return raw_score(ar, wp, cfg)


def grid_search_optimum(truth: GroundTruth, cxp, gc: GroundClass, cfg, resolution: int = 9):
    """Dense grid search over the control box; the oracle optimum.

    Returns (best cop vector, best true raw score).
    """
    axis = np.linspace(COP_LOW, COP_HIGH, resolution)
    grids = np.meshgrid(*([axis] * N_COP), indexing="ij")
    cops = np.stack([g.ravel() for g in grids], axis=1)
    best_score = -np.inf
    best_cop = cops[0]
    for cop in cops:
        s = true_raw_score(truth, cop, cxp, gc, cfg)
        if s > best_score:
            best_score = s
            best_cop = cop
    return best_cop, float(best_score)
