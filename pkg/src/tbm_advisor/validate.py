"""Historic-replay validation of a recommender.

Two surrogate scores are computed per control parameter. Synchronized
validation looks only at timesteps where the operator actually changed a
setpoint: among actions whose direction agrees with the recommendation,
it counts how often the optimality then improved. Contextual validation
relaxes the time alignment: for every timestep it finds the historic
sample with similar context, the most similar controls to the recommended
ones and a different optimality, and applies the same counting against
that stand-in.

The improvement test defaults to "the score delta is positive"; the
alternative reading "the raw score itself is positive" is kept behind the
``literal_sign`` flag for comparison (the raw score's sign depends on the
score configuration, which makes the literal form fragile).
"""

from __future__ import annotations

import numpy as np

from .domain import N_COP, ValidationCell, ValidationReport
from .neighbors import NeighborIndex

DEADBAND = 1e-9
SCORE_GAP = 1e-9


def _sign(x: float) -> int:
    if abs(x) < DEADBAND:
        return 0
    return 1 if x > 0 else -1


def synchronized_validation(
    records,
    scores,
    action_timestamps,
    recommender,
    literal_sign: bool = False,
):
    """Per-control (valid, total) counters over operator-action timesteps.

    ``action_timestamps`` is a sequence of 5 timestamp sets; an action on
    control j at t+1 is compared against the recommendation computed at
    t. Direction agreement increments the total; an optimality
    improvement on top increments the valid count.
    """
    scores = np.asarray(scores, dtype=float)
    cop = np.array([r.cop for r in records], dtype=float)
    ts = np.array([r.timestamp for r in records], dtype=float)
    valid = [0] * N_COP
    total = [0] * N_COP
    nominal = float(np.median(np.diff(ts))) if len(ts) > 1 else 0.0
    for i in range(len(records) - 1):
        if nominal > 0 and ts[i + 1] - ts[i] > 1.5 * nominal:
            continue  # segment boundary, not a consecutive observation
        next_ts = ts[i + 1]
        hit = [j for j in range(N_COP) if next_ts in action_timestamps[j]]
        if not hit:
            continue
        rec = np.asarray(recommender(i), dtype=float)
        for j in hit:
            observed = cop[i + 1, j] - cop[i, j]
            s_obs = _sign(observed)
            s_rec = _sign(rec[j])
            if s_obs == 0 or s_rec == 0 or s_obs != s_rec:
                continue
            total[j] += 1
            if literal_sign:
                improved = scores[i + 1] > 0.0
            else:
                improved = scores[i + 1] - scores[i] > 0.0
            if improved:
                valid[j] += 1
    return [ValidationCell(valid=v, total=t) for v, t in zip(valid, total)]


def contextual_validation(
    records,
    scores,
    recommender,
    index: NeighborIndex,
    literal_sign: bool = False,
):
    """Per-control (valid, total) counters against contextual stand-ins.

    For each timestep: among the context-nearest neighbors (self
    excluded) having a different optimality score, pick the one whose
    controls are closest to the recommended vector, then count direction
    agreement and improvement exactly as in synchronized validation.
    """
    scores = np.asarray(scores, dtype=float)
    cop = np.array([r.cop for r in records], dtype=float)
    valid = [0] * N_COP
    total = [0] * N_COP
    for i in range(len(records)):
        rec = np.asarray(recommender(i), dtype=float)
        target = cop[i] + rec
        neighbors = index.query(records[i].cxp, exclude=i)
        stand_in = None
        best_dist = np.inf
        for nb in neighbors:
            if abs(scores[nb.index] - scores[i]) <= SCORE_GAP:
                continue
            d = float(np.linalg.norm(target - cop[nb.index]))
            if d < best_dist:
                best_dist = d
                stand_in = nb.index
        if stand_in is None:
            continue
        for j in range(N_COP):
            observed = cop[stand_in, j] - cop[i, j]
            s_obs = _sign(observed)
            s_rec = _sign(rec[j])
            if s_obs == 0 or s_rec == 0 or s_obs != s_rec:
                continue
            total[j] += 1
            if literal_sign:
                improved = scores[stand_in] > 0.0
            else:
                improved = scores[stand_in] - scores[i] > 0.0
            if improved:
                valid[j] += 1
    return [ValidationCell(valid=v, total=t) for v, t in zip(valid, total)]


def build_report(recommender_name: str, sync_cells: dict, contextual_cells: dict) -> ValidationReport:
    """Assemble per-ground-class cells into one report."""
    return ValidationReport(
        recommender=recommender_name,
        sync={gc: tuple(cells) for gc, cells in sync_cells.items()},
        contextual={gc: tuple(cells) for gc, cells in contextual_cells.items()},
    )


def _fmt(ratio) -> str:
    if ratio is None:
        return "  --"
    return f"{100.0 * ratio:4.0f}"


def render_table(reports) -> str:
    """Aligned text table: per-class rows, per-control columns, one
    sub-column per recommender, synchronized and contextual blocks."""
    names = [r.recommender for r in reports]
    lines = []
    for kind, title in (("sync", "Synchronized Validation"), ("contextual", "Contextual Validation")):
        lines.append(title)
        header = "GC    " + " ".join(
            f"{f'CoP{j + 1}':>{5 * len(names)}}" for j in range(N_COP)
        ) + f" {'Avg':>{5 * len(names)}}"
        sub = "      " + " ".join(
            "".join(f"{n:>5}" for n in names) for _ in range(N_COP + 1)
        )
        lines.append(header)
        lines.append(sub)
        classes = sorted(
            {gc for r in reports for gc in getattr(r, kind)}, key=lambda g: g.value
        )
        for gc in classes:
            row = f"{gc.value:<6}"
            for j in range(N_COP):
                for r in reports:
                    cells = getattr(r, kind).get(gc)
                    row += _fmt(cells[j].ratio if cells else None)
                row += " "
            for r in reports:
                row += _fmt(r.row_average(kind, gc))
            lines.append(row)
        row = f"{'Avg':<6}"
        for j in range(N_COP):
            for r in reports:
                row += _fmt(r.column_average(kind, j))
            row += " "
        for r in reports:
            row += _fmt(r.grand_average(kind))
        lines.append(row)
        lines.append("")
    return "\n".join(lines)
