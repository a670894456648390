"""Drive-log ingestion: CSV loading, cleansing, smoothing, standardization
and reconstruction of operator actions from setpoint traces.

The pipeline order is cleanse -> reconstruct actions -> smooth ->
standardize. Actions are reconstructed before smoothing because the
kernel smears setpoint steps over its support.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import (
    N_COP,
    N_CXP,
    FeatureScaler,
    GroundClass,
    SensorRecord,
    validate_record,
)
from .errors import (
    EmptyAfterCleansingError,
    InsufficientDataError,
    NonUniformSamplingError,
    ParseError,
    SchemaMismatchError,
    UnimodalError,
    ZeroVarianceError,
)

logger = logging.getLogger(__name__)

COP_COLUMNS = tuple(f"cop_{j}" for j in range(1, N_COP + 1))
CXP_COLUMNS = tuple(f"cxp_{j}" for j in range(1, N_CXP + 1))
CSV_COLUMNS = (
    "timestamp",
    "tunnel_length",
    "advance_rate",
    "working_pressure",
    *COP_COLUMNS,
    *CXP_COLUMNS,
    "ground_class",
)
FEATURE_NAMES = COP_COLUMNS + CXP_COLUMNS

# channels eligible for plausibility filtering
NUMERIC_CHANNELS = ("tunnel_length", "advance_rate", "working_pressure") + FEATURE_NAMES


# --- CSV i/o -----------------------------------------------------------------

def load_csv(path, schema=CSV_COLUMNS) -> list:
    """Load one drive log; returns validated records in timestamp order.

    Rows with empty cells are dropped (and logged); any unparseable cell
    raises ParseError naming the row and column.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaMismatchError(f"{path}: file is empty") from None
        if tuple(header) != tuple(schema):
            raise SchemaMismatchError(
                f"{path}: header {header} does not match expected schema {list(schema)}"
            )
        records = []
        dropped = 0
        for row_no, row in enumerate(reader, start=1):
            if len(row) != len(schema):
                raise ParseError(
                    f"{path}: row {row_no} has {len(row)} cells, expected {len(schema)}",
                    row=row_no,
                )
            if any(cell.strip() == "" for cell in row):
                dropped += 1
                continue
            values = {}
            for col, cell in zip(schema, row):
                if col == "ground_class":
                    continue
                try:
                    values[col] = float(cell)
                except ValueError:
                    raise ParseError(
                        f"{path}: row {row_no}, column {col!r}: cannot parse {cell!r}",
                        row=row_no,
                        column=col,
                    ) from None
            try:
                gc = GroundClass.parse(row[list(schema).index("ground_class")])
            except Exception:
                raise ParseError(
                    f"{path}: row {row_no}: unknown ground class {row[-1]!r}",
                    row=row_no,
                    column="ground_class",
                ) from None
            records.append(
                validate_record(
                    timestamp=values["timestamp"],
                    tunnel_length=values["tunnel_length"],
                    advance_rate=values["advance_rate"],
                    working_pressure=values["working_pressure"],
                    cop=[values[c] for c in COP_COLUMNS],
                    cxp=[values[c] for c in CXP_COLUMNS],
                    ground_class=gc,
                )
            )
    if dropped:
        logger.info("%s: dropped %d rows with missing cells", path, dropped)
    records.sort(key=lambda r: r.timestamp)
    return records


def write_csv(records, path) -> None:
    """Write records using the canonical column schema."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow(
                [
                    repr(float(r.timestamp)),
                    repr(float(r.tunnel_length)),
                    repr(float(r.advance_rate)),
                    repr(float(r.working_pressure)),
                    *[repr(float(v)) for v in r.cop],
                    *[repr(float(v)) for v in r.cxp],
                    r.ground_class.value,
                ]
            )


def records_to_arrays(records) -> dict:
    """Column-major view of a record list (copies into ndarrays)."""
    return {
        "timestamp": np.array([r.timestamp for r in records], dtype=float),
        "tunnel_length": np.array([r.tunnel_length for r in records], dtype=float),
        "advance_rate": np.array([r.advance_rate for r in records], dtype=float),
        "working_pressure": np.array([r.working_pressure for r in records], dtype=float),
        "cop": np.array([r.cop for r in records], dtype=float),
        "cxp": np.array([r.cxp for r in records], dtype=float),
        "ground_class": [r.ground_class for r in records],
    }


# --- cleansing -----------------------------------------------------------------

@dataclass(frozen=True)
class CleansingConfig:
    """Knobs for :func:`cleanse`.

    ``plausibility_ranges`` maps channel names (see NUMERIC_CHANNELS) to
    inclusive (low, high) bounds; channels without an entry are not
    filtered. ``transient_seconds`` is trimmed from the survivors on each
    side of a removed standstill/retraction run.
    """

    plausibility_ranges: dict = field(default_factory=dict)
    transient_seconds: float = 60.0


@dataclass(frozen=True)
class CleansingReport:
    samples_in: int
    samples_out: int
    removed_by_rule: dict

    def __post_init__(self):
        total = self.samples_out + sum(self.removed_by_rule.values())
        if total != self.samples_in:
            raise ValueError("cleansing counters do not add up")

    def to_dict(self) -> dict:
        return {
            "samples_in": self.samples_in,
            "samples_out": self.samples_out,
            "removed_by_rule": dict(self.removed_by_rule),
        }


def fit_plausibility(records, low_q: float = 0.1, high_q: float = 99.9) -> dict:
    """Default plausibility ranges: central quantile band of a reference corpus."""
    arrays = records_to_arrays(records)
    ranges = {}
    for name in ("tunnel_length", "advance_rate", "working_pressure"):
        ranges[name] = (
            float(np.percentile(arrays[name], low_q)),
            float(np.percentile(arrays[name], high_q)),
        )
    for j, name in enumerate(COP_COLUMNS):
        col = arrays["cop"][:, j]
        ranges[name] = (float(np.percentile(col, low_q)), float(np.percentile(col, high_q)))
    for j, name in enumerate(CXP_COLUMNS):
        col = arrays["cxp"][:, j]
        ranges[name] = (float(np.percentile(col, low_q)), float(np.percentile(col, high_q)))
    return ranges


def _channel_value(record, name):
    if name in COP_COLUMNS:
        return record.cop[COP_COLUMNS.index(name)]
    if name in CXP_COLUMNS:
        return record.cxp[CXP_COLUMNS.index(name)]
    return getattr(record, name)


def cleanse(records, config: CleansingConfig | None = None):
    """Drop non-excavation and implausible samples.

    Removal rules, applied in order:
      unrealistic  -- sample outside a configured plausibility range;
      nonadvancing -- whole runs (length >= 2) of constant tunnel length;
      retraction   -- samples not strictly advancing past the furthest
                      kept tunnel length (pull-backs and re-traversals);
      transient    -- survivors within ``transient_seconds`` of a removed
                      nonadvancing/retraction run (start-up / shut-down
                      ramps around standstills).

    The result is idempotent: a second pass removes nothing, because all
    evidence of standstills is gone after the first.
    """
    config = config or CleansingConfig()
    n = len(records)
    status = [None] * n  # None = kept, else rule name

    for i, r in enumerate(records):
        for name, (lo, hi) in config.plausibility_ranges.items():
            v = _channel_value(r, name)
            if not (lo <= v <= hi):
                status[i] = "unrealistic"
                break

    # constant-length runs among the remaining samples
    alive = [i for i in range(n) if status[i] is None]
    run_start = 0
    while run_start < len(alive):
        run_end = run_start
        tl = records[alive[run_start]].tunnel_length
        while (
            run_end + 1 < len(alive)
            and records[alive[run_end + 1]].tunnel_length == tl
        ):
            run_end += 1
        if run_end > run_start:
            for k in range(run_start, run_end + 1):
                status[alive[k]] = "nonadvancing"
        run_start = run_end + 1

    # monotone envelope: keep only samples strictly advancing past the
    # furthest kept length
    best = -math.inf
    for i in range(n):
        if status[i] is not None:
            continue
        tl = records[i].tunnel_length
        if tl > best:
            best = tl
        else:
            status[i] = "retraction"

    # transient trim around removed motion runs
    motion_runs = []
    i = 0
    while i < n:
        if status[i] in ("nonadvancing", "retraction"):
            j = i
            while j + 1 < n and status[j + 1] in ("nonadvancing", "retraction"):
                j += 1
            motion_runs.append((records[i].timestamp, records[j].timestamp))
            i = j + 1
        else:
            i += 1
    if config.transient_seconds > 0 and motion_runs:
        for i in range(n):
            if status[i] is not None:
                continue
            t = records[i].timestamp
            for t0, t1 in motion_runs:
                if t0 - config.transient_seconds <= t <= t1 + config.transient_seconds:
                    status[i] = "transient"
                    break

    kept = [records[i] for i in range(n) if status[i] is None]
    counts = {"retraction": 0, "nonadvancing": 0, "unrealistic": 0, "transient": 0}
    for s in status:
        if s is not None:
            counts[s] += 1
    report = CleansingReport(samples_in=n, samples_out=len(kept), removed_by_rule=counts)
    if not kept:
        raise EmptyAfterCleansingError("no samples survived cleansing")
    return kept, report


# --- segmentation and smoothing ---------------------------------------------

def segment_bounds(timestamps, gap_factor: float = 1.5, spacing_tol: float = 0.01):
    """Split a timestamp vector into uniformly sampled segments.

    Returns (list of (start, stop) index pairs with stop exclusive,
    nominal spacing). Raises NonUniformSamplingError if spacing within a
    segment deviates more than ``spacing_tol`` from the nominal.
    """
    ts = np.asarray(timestamps, dtype=float)
    if ts.size < 2:
        return [(0, ts.size)], 10.0
    diffs = np.diff(ts)
    nominal = float(np.median(diffs))
    if nominal <= 0:
        raise NonUniformSamplingError("timestamps are not strictly increasing")
    bounds = []
    start = 0
    for i, dt in enumerate(diffs):
        if dt > gap_factor * nominal:
            bounds.append((start, i + 1))
            start = i + 1
    bounds.append((start, ts.size))
    for lo, hi in bounds:
        if hi - lo < 2:
            continue
        seg = np.diff(ts[lo:hi])
        if np.max(np.abs(seg - nominal)) > spacing_tol * nominal:
            raise NonUniformSamplingError(
                f"sample spacing in segment [{lo}:{hi}] deviates more than "
                f"{spacing_tol:.0%} from {nominal} s"
            )
    return bounds, nominal


def _gaussian_kernel(sigma_samples: float):
    radius = int(math.ceil(3.0 * sigma_samples))
    offsets = np.arange(-radius, radius + 1, dtype=float)
    return np.exp(-(offsets**2) / (2.0 * sigma_samples**2))


def _smooth_channel(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # renormalize at the edges: divide by the kernel mass actually inside
    n = x.size
    if n >= kernel.size:
        num = np.convolve(x, kernel, mode="same")
        den = np.convolve(np.ones_like(x), kernel, mode="same")
        return num / den
    # segment shorter than the kernel support: direct weighted sums
    radius = kernel.size // 2
    out = np.empty_like(x)
    for i in range(n):
        lo = max(0, i - radius)
        hi = min(n, i + radius + 1)
        w = kernel[lo - i + radius : hi - i + radius]
        out[i] = np.dot(w, x[lo:hi]) / w.sum()
    return out


def smooth(records, bandwidth_seconds: float = 30.0) -> list:
    """Gaussian-kernel moving average over every numeric channel.

    The kernel standard deviation equals ``bandwidth_seconds``; support is
    truncated at three standard deviations and the weights renormalized
    near segment edges. Timestamps and ground classes pass through.
    """
    if not records:
        return []
    arrays = records_to_arrays(records)
    bounds, nominal = segment_bounds(arrays["timestamp"])
    sigma = bandwidth_seconds / nominal
    kernel = _gaussian_kernel(sigma)

    channels = {
        "tunnel_length": arrays["tunnel_length"].copy(),
        "advance_rate": arrays["advance_rate"].copy(),
        "working_pressure": arrays["working_pressure"].copy(),
    }
    cop = arrays["cop"].copy()
    cxp = arrays["cxp"].copy()
    for lo, hi in bounds:
        if hi - lo < 2:
            continue
        for name, col in channels.items():
            col[lo:hi] = _smooth_channel(col[lo:hi], kernel)
        for j in range(N_COP):
            cop[lo:hi, j] = _smooth_channel(cop[lo:hi, j], kernel)
        for j in range(N_CXP):
            cxp[lo:hi, j] = _smooth_channel(cxp[lo:hi, j], kernel)

    out = []
    for i, r in enumerate(records):
        out.append(
            SensorRecord(
                timestamp=r.timestamp,
                tunnel_length=float(channels["tunnel_length"][i]),
                advance_rate=float(channels["advance_rate"][i]),
                working_pressure=float(channels["working_pressure"][i]),
                cop=tuple(float(v) for v in cop[i]),
                cxp=tuple(float(v) for v in cxp[i]),
                ground_class=r.ground_class,
            )
        )
    return out


# --- standardization -----------------------------------------------------------

def standardize(records, scaler: FeatureScaler | None = None):
    """Zero-mean/unit-std the 24 model features (cop + cxp channels).

    Without a scaler, fits population statistics on the given records and
    returns them; with one (inference mode), applies it unchanged. Target
    channels (advance rate, working pressure) are never touched: the
    optimality score needs them in physical units.
    """
    if scaler is None:
        if len(records) < 2:
            raise InsufficientDataError("need >= 2 records to fit feature statistics")
        arrays = records_to_arrays(records)
        x = np.hstack([arrays["cop"], arrays["cxp"]])
        mean = x.mean(axis=0)
        std = x.std(axis=0)  # population std
        for j, s in enumerate(std):
            if s == 0:
                raise ZeroVarianceError(
                    f"channel {FEATURE_NAMES[j]} is constant; cannot standardize",
                    channel=FEATURE_NAMES[j],
                )
        scaler = FeatureScaler(mean=tuple(map(float, mean)), std=tuple(map(float, std)))

    mean = scaler.mean_array
    std = scaler.std_array
    out = []
    for r in records:
        feats = (np.array(r.cop + r.cxp) - mean) / std
        out.append(
            SensorRecord(
                timestamp=r.timestamp,
                tunnel_length=r.tunnel_length,
                advance_rate=r.advance_rate,
                working_pressure=r.working_pressure,
                cop=tuple(float(v) for v in feats[:N_COP]),
                cxp=tuple(float(v) for v in feats[N_COP:]),
                ground_class=r.ground_class,
            )
        )
    return out, scaler


# --- operator action reconstruction ---------------------------------------------

@dataclass(frozen=True)
class ActionSeries:
    """Detected operator actions per control parameter.

    ``actions[j]`` is a frozenset of record timestamps at which control j
    changed by more than ``thresholds[j]``; ``used_fallback[j]`` marks
    controls where no bimodal valley was found and the quantile fallback
    threshold was used instead.
    """

    actions: tuple
    thresholds: tuple
    used_fallback: tuple

    def __post_init__(self):
        if any(t <= 0 for t in self.thresholds):
            raise ValueError("thresholds must be strictly positive")


_DROP_FRACTION = 0.5


def detect_threshold(diffs: np.ndarray) -> float:
    """Valley of the bimodal |successive difference| histogram.

    Sensor noise produces a mode of small fluctuations and operator
    actions a mode of large ones; the deepest bin between the two modes
    separates them. Bin width follows Freedman-Diaconis, but the bin
    count is capped at sqrt(n): when actions sit far out in the tail, FD
    over-bins and the noise mode fragments into ragged sub-peaks that
    would outrank the sparse action mode. The second mode must be parted
    from the first by a real drop (valley below half the smaller peak),
    otherwise UnimodalError is raised.
    """
    d = np.asarray(diffs, dtype=float)
    if d.size < 4 or d.max() == d.min():
        raise UnimodalError("diff distribution has no spread")
    q25, q75 = np.percentile(d, [25, 75])
    if q75 == 0.0:
        # noise-free setpoint trace: the small-fluctuation mode is a point
        # mass at zero, so any movement at all is an operator action
        smallest_step = d[d > 0.0].min()
        return float(max(smallest_step / 2.0, _MIN_THRESHOLD))
    width = 2.0 * (q75 - q25) / d.size ** (1.0 / 3.0)
    sqrt_bins = max(2, round(math.sqrt(d.size)))
    if width <= 0:
        n_bins = sqrt_bins
    else:
        fd_bins = math.ceil((d.max() - d.min()) / width)
        n_bins = max(2, min(fd_bins, sqrt_bins))
    n_bins = int(min(512, n_bins))
    counts, edges = np.histogram(d, bins=n_bins)

    peaks = []
    for i in range(n_bins):
        if counts[i] == 0:
            continue
        left = counts[i - 1] if i > 0 else -1
        right = counts[i + 1] if i < n_bins - 1 else -1
        if counts[i] > left and counts[i] >= right:
            peaks.append(i)
    if len(peaks) < 2:
        raise UnimodalError("fewer than two modes in the fluctuation histogram")

    primary = min(peaks, key=lambda i: (-counts[i], i))
    candidates = []
    for p in peaks:
        lo, hi = min(primary, p), max(primary, p)
        if hi - lo < 2:
            continue
        valley_count = counts[lo + 1 : hi].min()
        if valley_count < _DROP_FRACTION * min(counts[lo], counts[hi]):
            candidates.append(p)
    if not candidates:
        raise UnimodalError("no drop between the two modes")
    secondary = min(candidates, key=lambda i: (-counts[i], i))

    lo, hi = min(primary, secondary), max(primary, secondary)
    between = counts[lo + 1 : hi]
    valley = lo + 1 + int(np.argmin(between))
    return float((edges[valley] + edges[valley + 1]) / 2.0)


_MIN_THRESHOLD = 1e-12


def reconstruct_actions(
    records,
    min_records: int = 100,
    fallback_quantile: float = 95.0,
) -> ActionSeries:
    """Recover operator setpoint changes from the control traces.

    For each control channel, timestamps where the absolute successive
    difference exceeds the detected threshold count as actions; runs of
    consecutive detections collapse to the single largest step (smoothing
    or ramps would otherwise multiply one action into many).
    """
    if len(records) < min_records:
        raise InsufficientDataError(
            f"need >= {min_records} records to reconstruct actions, got {len(records)}"
        )
    arrays = records_to_arrays(records)
    ts = arrays["timestamp"]
    actions = []
    thresholds = []
    used_fallback = []
    for j in range(N_COP):
        diffs = np.abs(np.diff(arrays["cop"][:, j]))
        try:
            threshold = detect_threshold(diffs)
            fallback = False
        except UnimodalError:
            threshold = float(np.percentile(diffs, fallback_quantile, method="higher"))
            fallback = True
        threshold = max(threshold, _MIN_THRESHOLD)
        hits = np.flatnonzero(diffs > threshold)
        stamps = set()
        run = []
        for idx in list(hits) + [None]:
            if run and (idx is None or idx != run[-1] + 1):
                peak = max(run, key=lambda i: diffs[i])
                stamps.add(float(ts[peak + 1]))
                run = []
            if idx is not None:
                run.append(idx)
        actions.append(frozenset(stamps))
        thresholds.append(threshold)
        used_fallback.append(fallback)
    return ActionSeries(
        actions=tuple(actions),
        thresholds=tuple(thresholds),
        used_fallback=tuple(used_fallback),
    )
