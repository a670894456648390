"""End-to-end pipeline stages shared by the CLI, the service and tests.

On-disk layout of a processed corpus directory:
    corpus.csv            cleansed, smoothed, per-class standardized records
    feature_stats.json    per-class feature means/stds
    cleansing_report.json counts per removal rule, per input file
    actions.json          reconstructed operator-action timestamps per control

Model directories hold ``optimality_<GC>.json`` and ``model_<GC>.json``
per ground class; models embed the fingerprint of the corpus they were
trained on.
"""

from __future__ import annotations

import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from . import validate as validate_mod
from .advisor import (
    CORPUS_FILE,
    STATS_FILE,
    BaselineNeighborRecommender,
    GradientRecommender,
    corpus_fingerprint,
)
from .credibility import calibrate, successor_deltas
from .domain import N_COP, SCHEMA_VERSION, FeatureScaler, GroundClass
from .errors import InsufficientDataError, InvalidConfigError, MissingModelError
from .ingest import (
    CleansingConfig,
    cleanse,
    load_csv,
    reconstruct_actions,
    records_to_arrays,
    smooth,
    standardize,
    write_csv,
)
from .mlp import FeedForwardRegressor, TrainConfig, kfold_grid_search, load_model, save_model
from .neighbors import build_index
from .optimality import fit_config, load_config, raw_scores, save_config

logger = logging.getLogger(__name__)

ACTIONS_FILE = "actions.json"
REPORT_FILE = "cleansing_report.json"
INTER_DRIVE_GAP_TICKS = 10


def _dump_json(payload: dict, path: Path) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- ingest ---------------------------------------------------------------------

def run_ingest(
    csv_paths,
    out_dir,
    stats_path=None,
    cleansing: CleansingConfig | None = None,
    bandwidth_seconds: float = 30.0,
    min_action_records: int = 100,
) -> dict:
    """Cleansing, action reconstruction, smoothing and standardization.

    Multiple drive files are processed independently, then merged with
    their timestamps re-based so drives never overlap (the inter-drive
    gap keeps successor detection from crossing drive boundaries).
    Actions are reconstructed per drive *before* smoothing.

    With ``stats_path`` the stored statistics are applied (inference
    mode); otherwise fresh per-class statistics are fitted.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    merged = []
    merged_actions = [set() for _ in range(N_COP)]
    thresholds = [0.0] * N_COP
    fallbacks = [False] * N_COP
    file_reports = {}
    offset = 0.0
    for path in csv_paths:
        records = load_csv(path)
        records, report = cleanse(records, cleansing)
        file_reports[str(path)] = report.to_dict()
        try:
            actions = reconstruct_actions(records, min_records=min_action_records)
        except InsufficientDataError:
            logger.warning("%s: too few records for action reconstruction", path)
            actions = None
        records = smooth(records, bandwidth_seconds=bandwidth_seconds)

        ts = np.array([r.timestamp for r in records])
        spacing = float(np.median(np.diff(ts))) if len(ts) > 1 else 10.0
        shift = offset - ts[0]
        for r in records:
            merged.append(_shift_record(r, shift))
        if actions is not None:
            for j in range(N_COP):
                merged_actions[j].update(t + shift for t in actions.actions[j])
                thresholds[j] = max(thresholds[j], actions.thresholds[j])
                fallbacks[j] = fallbacks[j] or actions.used_fallback[j]
        offset = merged[-1].timestamp + INTER_DRIVE_GAP_TICKS * spacing

    merged.sort(key=lambda r: r.timestamp)

    stored_stats = None
    if stats_path is not None:
        stored_stats = load_feature_stats(stats_path)

    standardized = [None] * len(merged)
    stats = {}
    for gc in GroundClass:
        idx = [i for i, r in enumerate(merged) if r.ground_class == gc]
        if not idx:
            continue
        subset = [merged[i] for i in idx]
        scaler = stored_stats.get(gc) if stored_stats else None
        if stored_stats is not None and scaler is None:
            raise InvalidConfigError(f"stored stats lack an entry for {gc.value}")
        out_records, scaler = standardize(subset, scaler)
        for i, rec in zip(idx, out_records):
            standardized[i] = rec
        stats[gc] = scaler

    write_csv(standardized, out_dir / CORPUS_FILE)
    save_feature_stats(stats, out_dir / STATS_FILE)
    _dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "per_file": file_reports,
            "totals": _sum_reports(file_reports.values()),
        },
        out_dir / REPORT_FILE,
    )
    _dump_json(
        {
            "schema_version": SCHEMA_VERSION,
            "actions": [sorted(s) for s in merged_actions],
            "thresholds": thresholds,
            "used_fallback": fallbacks,
        },
        out_dir / ACTIONS_FILE,
    )
    return {
        "records": len(standardized),
        "out_dir": str(out_dir),
        "cleansing": _sum_reports(file_reports.values()),
    }


def _shift_record(record, shift: float):
    from dataclasses import replace

    return replace(record, timestamp=float(record.timestamp + shift))


def _sum_reports(reports) -> dict:
    totals = {"samples_in": 0, "samples_out": 0, "removed_by_rule": {}}
    for rep in reports:
        totals["samples_in"] += rep["samples_in"]
        totals["samples_out"] += rep["samples_out"]
        for rule, count in rep["removed_by_rule"].items():
            totals["removed_by_rule"][rule] = (
                totals["removed_by_rule"].get(rule, 0) + count
            )
    return totals


def save_feature_stats(stats: dict, path) -> None:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "per_class": {gc.value: scaler.to_dict() for gc, scaler in stats.items()},
    }
    _dump_json(payload, Path(path))


def load_feature_stats(path) -> dict:
    d = json.loads(Path(path).read_text())
    return {
        GroundClass.parse(name): FeatureScaler.from_dict(entry)
        for name, entry in d["per_class"].items()
    }


def load_actions(path) -> list:
    d = json.loads(Path(path).read_text())
    return [frozenset(ts) for ts in d["actions"]]


# --- optimality fitting -----------------------------------------------------------

def run_fit_optimality(
    corpus_dir,
    out_dir,
    penalty_below: float = 0.8,
    penalty_above: float = 3.0,
    shutdown_pressure: float = 150.0,
) -> dict:
    """Fit and persist one score config per ground class present."""
    corpus_dir = Path(corpus_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = load_csv(corpus_dir / CORPUS_FILE)
    written = {}
    for gc in GroundClass:
        subset = [r for r in records if r.ground_class == gc]
        if not subset:
            continue
        cfg = fit_config(
            subset,
            gc,
            penalty_below=penalty_below,
            penalty_above=penalty_above,
            shutdown_pressure=shutdown_pressure,
        )
        path = out_dir / f"optimality_{gc.value}.json"
        save_config(cfg, path)
        written[gc.value] = str(path)
    return written


# --- training -------------------------------------------------------------------

def run_train(
    corpus_dir,
    models_dir,
    gc: GroundClass,
    seed: int = 0,
    train_config: TrainConfig | None = None,
    grid: dict | None = None,
    grid_folds: int = 10,
    val_fraction: float = 0.2,
) -> dict:
    """Train (optionally grid-searching) the per-class score model.

    The per-class corpus is split once (seeded) into train/validation;
    the credibility calibration percentiles come from the validation
    split only. The written model embeds the corpus fingerprint.
    """
    corpus_dir = Path(corpus_dir)
    models_dir = Path(models_dir)
    models_dir.mkdir(parents=True, exist_ok=True)
    corpus_path = corpus_dir / CORPUS_FILE
    records = load_csv(corpus_path)
    subset = [r for r in records if r.ground_class == gc]
    if len(subset) < 30:
        raise InsufficientDataError(
            f"need >= 30 records for {gc.value}, got {len(subset)}"
        )
    cfg_path = models_dir / f"optimality_{gc.value}.json"
    if not cfg_path.exists():
        raise MissingModelError(
            f"optimality config {cfg_path} not found; run fit-optimality first",
            ground_class=gc,
        )
    opt_cfg = load_config(cfg_path)

    arrays = records_to_arrays(subset)
    features = np.hstack([arrays["cop"], arrays["cxp"]])
    scores = raw_scores(arrays["advance_rate"], arrays["working_pressure"], opt_cfg)

    base = train_config or TrainConfig(seed=seed)
    if base.seed != seed:
        from dataclasses import replace

        base = replace(base, seed=seed)

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(subset))
    n_val = max(1, int(round(val_fraction * len(subset))))
    val_idx = np.sort(order[:n_val])
    train_idx = np.sort(order[n_val:])

    if grid:
        base, _ = kfold_grid_search(
            features[train_idx], scores[train_idx], grid, k=grid_folds, base=base
        )

    est = FeedForwardRegressor(
        hidden_layers=base.hidden_layers,
        epochs=base.epochs,
        batch_size=base.batch_size,
        learning_rate=base.learning_rate,
        adam_beta1=base.adam_beta1,
        adam_beta2=base.adam_beta2,
        adam_epsilon=base.adam_epsilon,
        dropout=base.dropout,
        seed=base.seed,
    )
    est.fit(features[train_idx], scores[train_idx])

    # calibration on successor-bearing validation points
    eligible, dcop, dy = successor_deltas(subset, scores)
    val_mask = np.zeros(len(subset), dtype=bool)
    val_mask[val_idx] = True
    calib_mask = eligible & val_mask
    if calib_mask.sum() < 2:
        raise InsufficientDataError(
            f"too few successor-bearing validation samples for {gc.value}"
        )
    x_cal = features[calib_mask]
    preds = est.predict(x_cal)
    grads = est.input_gradient(x_cal)[:, :N_COP]
    e1_list = np.abs(preds - scores[calib_mask])
    e2_list = np.abs(
        np.einsum("ij,ij->i", grads, dcop[calib_mask]) - dy[calib_mask]
    )
    calibration = calibrate(e1_list, e2_list)

    stats = load_feature_stats(corpus_dir / STATS_FILE)
    model = est.to_model(
        feature_scaler=stats[gc],
        ground_class=gc,
        corpus_fingerprint=corpus_fingerprint(corpus_path),
        calibration=calibration,
    )
    # deterministic split provenance for audit
    split_digest = hashlib.sha256(val_idx.tobytes()).hexdigest()
    model = _with_split_meta(model, seed, len(train_idx), len(val_idx), split_digest)
    path = models_dir / f"model_{gc.value}.json"
    save_model(model, path)
    train_mse = float(np.mean((est.predict(features[train_idx]) - scores[train_idx]) ** 2))
    val_mse = float(np.mean((est.predict(features[val_idx]) - scores[val_idx]) ** 2))
    return {
        "model_path": str(path),
        "train_mse": train_mse,
        "val_mse": val_mse,
        "n_train": int(len(train_idx)),
        "n_val": int(len(val_idx)),
    }


def _with_split_meta(model, seed, n_train, n_val, digest):
    from dataclasses import replace

    meta = dict(model.train_config)
    meta["calibration_split"] = {
        "seed": seed,
        "n_train": n_train,
        "n_val": n_val,
        "val_indices_sha256": digest,
    }
    return replace(model, train_config=meta)


# --- validation --------------------------------------------------------------------

def run_validate(
    models_dir,
    corpus_dir,
    include_baseline: bool = False,
    literal_sign: bool = False,
    step_scale: float = 0.1,
    extra_recommenders=None,
) -> list:
    """Synchronized + contextual validation for the gradient recommender
    (and optionally the neighbor baseline) on a processed corpus.

    Returns a list of ValidationReport, one per recommender.
    """
    models_dir = Path(models_dir)
    corpus_dir = Path(corpus_dir)
    records = load_csv(corpus_dir / CORPUS_FILE)
    actions_path = corpus_dir / ACTIONS_FILE
    if actions_path.exists():
        action_sets = load_actions(actions_path)
    else:
        logger.warning("no %s; reconstructing actions from the corpus", ACTIONS_FILE)
        series = reconstruct_actions(records)
        action_sets = list(series.actions)

    sync_tables = {}
    ctx_tables = {}
    for gc in GroundClass:
        subset_idx = [i for i, r in enumerate(records) if r.ground_class == gc]
        if len(subset_idx) < 20:
            continue
        subset = [records[i] for i in subset_idx]
        model_path = models_dir / f"model_{gc.value}.json"
        cfg_path = models_dir / f"optimality_{gc.value}.json"
        if not model_path.exists():
            raise MissingModelError(f"missing model file {model_path}", ground_class=gc)
        model = load_model(model_path)
        opt_cfg = load_config(cfg_path)
        arrays = records_to_arrays(subset)
        features = np.hstack([arrays["cop"], arrays["cxp"]])
        scores = raw_scores(arrays["advance_rate"], arrays["working_pressure"], opt_cfg)
        index = build_index(subset)
        est = FeedForwardRegressor.from_model(model)

        recs = {"GB": GradientRecommender(est, features, step_scale=step_scale)}
        if include_baseline:
            recs["NN"] = BaselineNeighborRecommender(
                index, arrays["cop"], scores, arrays["cxp"]
            )
        if extra_recommenders:
            for name, factory in extra_recommenders.items():
                recs[name] = factory(gc, subset, features, scores, index)

        for name, rec in recs.items():
            sync_tables.setdefault(name, {})[gc] = validate_mod.synchronized_validation(
                subset, scores, action_sets, rec, literal_sign=literal_sign
            )
            ctx_tables.setdefault(name, {})[gc] = validate_mod.contextual_validation(
                subset, scores, rec, index, literal_sign=literal_sign
            )

    reports = []
    for name in sync_tables:
        reports.append(
            validate_mod.build_report(name, sync_tables[name], ctx_tables[name])
        )
    return reports
