import json

import numpy as np
import pytest

from tbm_advisor import pipeline
from tbm_advisor.domain import GroundClass
from tbm_advisor.ingest import load_csv, write_csv
from tbm_advisor.mlp import TrainConfig
from tbm_advisor.sim import DriveSpec, OperatorPolicy, SegmentSpec, generate_drive


def _small_drive(tmp_path, seed=5, n=400, noise=0.05):
    spec = DriveSpec(
        segments=(SegmentSpec(GroundClass.GC1, n),),
        noise_std=noise,
        seed=seed,
        policy=OperatorPolicy(action_probability=0.05),
    )
    path = tmp_path / "raw.csv"
    result = generate_drive(spec)
    write_csv(result.records, path)
    return path, result


class TestRunIngest:
    def test_creates_corpus_files(self, tmp_path):
        raw, _ = _small_drive(tmp_path)
        out = tmp_path / "corpus"
        summary = pipeline.run_ingest([raw], out)
        for name in ("corpus.csv", "feature_stats.json", "cleansing_report.json", "actions.json"):
            assert (out / name).exists()
        assert summary["records"] > 0
        report = json.loads((out / "cleansing_report.json").read_text())
        totals = report["totals"]
        assert totals["samples_out"] + sum(totals["removed_by_rule"].values()) == totals["samples_in"]

    def test_standardized_features_have_unit_scale(self, tmp_path):
        raw, _ = _small_drive(tmp_path)
        out = tmp_path / "corpus"
        pipeline.run_ingest([raw], out)
        records = load_csv(out / "corpus.csv")
        cop = np.array([r.cop for r in records])
        assert np.allclose(cop.mean(axis=0), 0.0, atol=1e-9)
        assert np.allclose(cop.std(axis=0), 1.0, atol=1e-9)

    def test_inference_mode_reuses_stats(self, tmp_path):
        raw, _ = _small_drive(tmp_path, seed=5)
        fit_dir = tmp_path / "fit"
        pipeline.run_ingest([raw], fit_dir)

        raw2, _ = _small_drive(tmp_path, seed=6)
        apply_dir = tmp_path / "apply"
        pipeline.run_ingest([raw2], apply_dir, stats_path=fit_dir / "feature_stats.json")
        assert (
            json.loads((apply_dir / "feature_stats.json").read_text())
            == json.loads((fit_dir / "feature_stats.json").read_text())
        )
        # a different drive standardized with foreign stats is off-center
        records = load_csv(apply_dir / "corpus.csv")
        cop = np.array([r.cop for r in records])
        assert not np.allclose(cop.mean(axis=0), 0.0, atol=1e-6)

    def test_multiple_files_rebased_in_time(self, tmp_path):
        raw1, _ = _small_drive(tmp_path, seed=5, n=200)
        raw2 = tmp_path / "raw2.csv"
        result2 = generate_drive(
            DriveSpec(segments=(SegmentSpec(GroundClass.GC1, 200),), seed=6,
                      noise_std=0.05, policy=OperatorPolicy(action_probability=0.05))
        )
        write_csv(result2.records, raw2)
        out = tmp_path / "corpus"
        pipeline.run_ingest([raw1, raw2], out)
        records = load_csv(out / "corpus.csv")
        ts = [r.timestamp for r in records]
        assert ts == sorted(ts)
        assert len(set(ts)) == len(ts)


class TestTrainAndValidate:
    @pytest.fixture()
    def corpus(self, tmp_path):
        raw, _ = _small_drive(tmp_path, n=500)
        out = tmp_path / "corpus"
        pipeline.run_ingest([raw], out)
        pipeline.run_fit_optimality(out, out)
        return out

    def test_fit_optimality_writes_config(self, corpus):
        cfg = json.loads((corpus / "optimality_GC1.json").read_text())
        assert cfg["w1"] == 0.8 and cfg["w2"] == 3.0
        assert cfg["norm_min"] < cfg["norm_max"]

    def test_train_writes_model_with_fingerprint(self, corpus):
        cfg = TrainConfig(hidden_layers=(12,), epochs=30, batch_size=100)
        info = pipeline.run_train(corpus, corpus, GroundClass.GC1, seed=3, train_config=cfg)
        model = json.loads((corpus / "model_GC1.json").read_text())
        assert model["corpus_fingerprint"]
        assert model["calibration"]["q5"][0] <= model["calibration"]["q95"][0]
        assert info["val_mse"] >= 0.0
        split = model["train_config"]["calibration_split"]
        assert split["n_train"] + split["n_val"] == info["n_train"] + info["n_val"]

    def test_training_is_deterministic_bytes(self, tmp_path, corpus):
        cfg = TrainConfig(hidden_layers=(12,), epochs=20, batch_size=100)
        out1 = tmp_path / "m1"
        out2 = tmp_path / "m2"
        for out in (out1, out2):
            out.mkdir()
            pipeline.run_fit_optimality(corpus, out)
            pipeline.run_train(corpus, out, GroundClass.GC1, seed=9, train_config=cfg)
        assert (out1 / "model_GC1.json").read_bytes() == (out2 / "model_GC1.json").read_bytes()

    def test_validate_produces_reports(self, corpus):
        cfg = TrainConfig(hidden_layers=(12,), epochs=30, batch_size=100)
        pipeline.run_train(corpus, corpus, GroundClass.GC1, seed=3, train_config=cfg)
        reports = pipeline.run_validate(corpus, corpus, include_baseline=True)
        names = {r.recommender for r in reports}
        assert names == {"GB", "NN"}
        gb = next(r for r in reports if r.recommender == "GB")
        cells = gb.sync[GroundClass.GC1]
        assert len(cells) == 5
        assert all(c.valid <= c.total for c in cells)
        ctx = gb.contextual[GroundClass.GC1]
        assert any(c.total > 0 for c in ctx)
