"""Command-line entry point tying the pipeline together.

    tbm-advisor simulate --spec spec.json --out drive.csv
    tbm-advisor ingest drive.csv --out corpus/
    tbm-advisor fit-optimality --corpus corpus/ --out models/ --w1 0.8 --w2 3.0 --ub 150
    tbm-advisor train --corpus corpus/ --out models/ --gc GC1 --seed 7
    tbm-advisor recommend --models models/ --input sample.json
    tbm-advisor validate --models models/ --corpus corpus/ --baseline
    tbm-advisor serve --models models/ --sim spec.json --port 8000

Failures print a machine-readable JSON object on stderr and exit with the
error class's documented code.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import advisor, pipeline, sim
from .domain import GroundClass
from .errors import AdvisorError
from .ingest import CleansingConfig, write_csv
from .mlp import TrainConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tbm-advisor", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic drive CSV")
    p.add_argument("--spec", required=True, help="drive spec JSON")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--actions-out", help="also write the true action log JSON")

    p = sub.add_parser("ingest", help="cleanse, smooth and standardize drive CSVs")
    p.add_argument("csv", nargs="+", help="raw drive CSV files")
    p.add_argument("--out", required=True, help="output corpus directory")
    p.add_argument("--stats", help="apply stored feature stats (inference mode)")
    p.add_argument("--transient-seconds", type=float, default=60.0)
    p.add_argument("--bandwidth-seconds", type=float, default=30.0)

    p = sub.add_parser("fit-optimality", help="fit per-class score configs")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="output directory (default: corpus dir)")
    p.add_argument("--w1", type=float, default=0.8, help="pressure weight below the margin bound")
    p.add_argument("--w2", type=float, default=3.0, help="pressure weight above the margin bound")
    p.add_argument("--ub", type=float, default=150.0, help="shutdown pressure threshold [bar]")

    p = sub.add_parser("train", help="train the per-class score model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", help="model directory (default: corpus dir)")
    p.add_argument("--gc", required=True, choices=[g.value for g in GroundClass])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--grid", help="hyperparameter grid JSON file")
    p.add_argument("--epochs", type=int, help="override training epochs")
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--dropout", type=float)

    p = sub.add_parser("recommend", help="print a recommendation for one sample")
    p.add_argument("--models", required=True)
    p.add_argument("--corpus", help="neighbor corpus directory (default: models dir)")
    p.add_argument("--input", required=True, help="JSON {ground_class, cop:[5], cxp:[19]}")
    p.add_argument("--step-scale", type=float, default=advisor.DEFAULT_STEP_SCALE)

    p = sub.add_parser("validate", help="synchronized/contextual validation report")
    p.add_argument("--models", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--baseline", action="store_true", help="also score the neighbor baseline")
    p.add_argument("--literal-sign", action="store_true",
                   help="count raw-score sign instead of score improvement")
    p.add_argument("--out", help="write the report JSON here")

    p = sub.add_parser("serve", help="start the advisory HTTP service")
    p.add_argument("--models", required=True)
    p.add_argument("--corpus", help="neighbor corpus directory (default: models dir)")
    p.add_argument("--sim", help="drive spec JSON for live sessions")
    p.add_argument("--ui", help="serve a built dashboard directory at /ui")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _cmd_simulate(args) -> dict:
    spec = sim.load_spec(args.spec)
    result = sim.generate_drive(spec)
    write_csv(result.records, args.out)
    if args.actions_out:
        Path(args.actions_out).write_text(
            json.dumps(
                {
                    "schema_version": 1,
                    "actions": [[t, j] for t, j in result.actions],
                },
                sort_keys=True,
            )
            + "\n"
        )
    return {"records": len(result.records), "out": args.out}


def _cmd_ingest(args) -> dict:
    cleansing = CleansingConfig(transient_seconds=args.transient_seconds)
    return pipeline.run_ingest(
        args.csv,
        args.out,
        stats_path=args.stats,
        cleansing=cleansing,
        bandwidth_seconds=args.bandwidth_seconds,
    )


def _cmd_fit_optimality(args) -> dict:
    return pipeline.run_fit_optimality(
        args.corpus,
        args.out or args.corpus,
        penalty_below=args.w1,
        penalty_above=args.w2,
        shutdown_pressure=args.ub,
    )


def _cmd_train(args) -> dict:
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.batch_size is not None:
        overrides["batch_size"] = args.batch_size
    if args.learning_rate is not None:
        overrides["learning_rate"] = args.learning_rate
    if args.dropout is not None:
        overrides["dropout"] = args.dropout
    cfg = TrainConfig(seed=args.seed, **overrides)
    grid = json.loads(Path(args.grid).read_text()) if args.grid else None
    return pipeline.run_train(
        args.corpus,
        args.out or args.corpus,
        GroundClass.parse(args.gc),
        seed=args.seed,
        train_config=cfg,
        grid=grid,
    )


def _cmd_recommend(args) -> dict:
    payload = json.loads(Path(args.input).read_text())
    registry = advisor.load_registry(args.models, corpus_dir=args.corpus)
    rec = advisor.recommend(
        registry,
        GroundClass.parse(payload["ground_class"]),
        payload["cop"],
        payload["cxp"],
        step_scale=args.step_scale,
    )
    return rec.to_dict()


def _cmd_validate(args) -> dict:
    from .validate import render_table

    reports = pipeline.run_validate(
        args.models,
        args.corpus,
        include_baseline=args.baseline,
        literal_sign=args.literal_sign,
    )
    print(render_table(reports))
    payload = {"reports": [r.to_dict() for r in reports]}
    if args.out:
        Path(args.out).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return {"recommenders": [r.recommender for r in reports], "out": args.out}


def _cmd_serve(args) -> dict:
    import uvicorn

    from .service import create_app

    registry = advisor.load_registry(args.models, corpus_dir=args.corpus)
    spec = sim.load_spec(args.sim) if args.sim else None
    app = create_app(registry, sim_spec=spec, ui_dir=args.ui)
    uvicorn.run(app, host=args.host, port=args.port)
    return {}


_HANDLERS = {
    "simulate": _cmd_simulate,
    "ingest": _cmd_ingest,
    "fit-optimality": _cmd_fit_optimality,
    "train": _cmd_train,
    "recommend": _cmd_recommend,
    "validate": _cmd_validate,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = _HANDLERS[args.command](args)
    except AdvisorError as err:
        json.dump(
            {"error": type(err).__name__, "message": str(err), "exit_code": err.exit_code},
            sys.stderr,
        )
        sys.stderr.write("\n")
        return err.exit_code
    if result:
        print(json.dumps(result, indent=2, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
