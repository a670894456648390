import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def demo_artifacts(tmp_path_factory):
    """One small end-to-end pipeline run shared by integration tests:
    simulate -> ingest -> fit-optimality -> train (all three classes)."""
    from tbm_advisor import pipeline
    from tbm_advisor.domain import GroundClass
    from tbm_advisor.ingest import write_csv
    from tbm_advisor.mlp import TrainConfig
    from tbm_advisor.sim import DriveSpec, OperatorPolicy, SegmentSpec, generate_drive

    root = tmp_path_factory.mktemp("artifacts")
    spec = DriveSpec(
        segments=tuple(SegmentSpec(gc, 700) for gc in GroundClass),
        noise_std=0.05,
        seed=123,
        policy=OperatorPolicy(action_probability=0.04, jump_probability=0.3),
    )
    raw_csv = root / "raw.csv"
    result = generate_drive(spec)
    write_csv(result.records, raw_csv)

    corpus = root / "corpus"
    pipeline.run_ingest([raw_csv], corpus)
    pipeline.run_fit_optimality(corpus, corpus)
    cfg = TrainConfig(hidden_layers=(24, 24), epochs=60, batch_size=100, dropout=0.1)
    for gc in GroundClass:
        pipeline.run_train(corpus, corpus, gc, seed=11, train_config=cfg)
    return {"root": root, "corpus": corpus, "spec": spec, "drive": result}


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        status = "PASS" if report.passed else "FAIL"
        print(f"\n[ACCEPTANCE {status}] {name}", flush=True)
