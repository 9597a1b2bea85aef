import csv
import json

import numpy as np
import pytest

from singlelife import experiments as X
from singlelife.errors import ConfigError


def micro_spec(**kw):
    base = dict(study="pairing_ablation", seeds=[0], world_seed=61,
                duration=10.0, fps=3.0, image_size=32, landmarks=8, points=120,
                steps=12, batch=4, strategies=["augmented", "temporal"],
                durations=[0.0, 6.0], trajectories=["static", "walk"],
                maskings=[0.5], jaccards=[0.4, 0.7], gap=[1, 3], per_anchor=1,
                spatial_min_gap=2,
                n_mined_pairs=20, ref_world_seeds=[71, 72], testset_pairs=5,
                eval_pairs=3, probe_steps=15, probe_train_frames=15,
                probe_eval_frames=6, masking=0.75)
    base.update(kw)
    return X.StudySpec(**base)


class TestSpecValidation:
    def test_invalid_masking_rejected(self):
        with pytest.raises(ConfigError):
            micro_spec(maskings=[0.5, 1.0])
        with pytest.raises(ConfigError):
            micro_spec(masking=1.0)

    def test_unknown_study(self):
        with pytest.raises(ConfigError):
            micro_spec(study="bogus")

    def test_empty_grid(self):
        with pytest.raises(ConfigError):
            micro_spec(durations=[])

    def test_load_spec_file(self, tmp_path):
        f = tmp_path / "s.cfg"
        f.write_text('study = sweep\nseeds = [0, 1]\nmaskings = [0.5]\n'
                     'jaccards = [0.7]\nsteps = 5\n')
        spec = X.load_study_spec(f)
        assert spec.study == "sweep"
        assert spec.seeds == [0, 1]

    def test_load_spec_unknown_key(self, tmp_path):
        f = tmp_path / "s.cfg"
        f.write_text("study = sweep\nnot_a_key = 1\n")
        with pytest.raises(ConfigError):
            X.load_study_spec(f)


class TestCells:
    def test_resumable_by_artifact_hash(self, tmp_path):
        calls = []

        def fn():
            calls.append(1)
            return {"value": 42}

        payload = {"study": "x", "cell": 1}
        a = X.run_cell(tmp_path, payload, fn)
        b = X.run_cell(tmp_path, payload, fn)
        assert a == b
        assert len(calls) == 1

    def test_distinct_payloads_distinct_cells(self, tmp_path):
        X.run_cell(tmp_path, {"cell": 1}, lambda: {"v": 1})
        X.run_cell(tmp_path, {"cell": 2}, lambda: {"v": 2})
        assert len(list(tmp_path.glob("*.json"))) == 2


class TestSummarize:
    def test_equals_recomputation(self):
        raw = [{"g": "a", "m": 1.0}, {"g": "a", "m": 3.0}, {"g": "b", "m": 5.0}]
        out = X.summarize(raw, ["g"], ["m"])
        assert out[0]["m_mean"] == 2.0
        assert out[0]["m_std"] == pytest.approx(np.std([1.0, 3.0]))
        assert out[1]["m_mean"] == 5.0
        assert out[0]["n"] == 2


def read_csv_rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


@pytest.mark.slow
class TestStudiesEndToEnd:
    def test_pairing_ablation_schema_and_baseline(self, tmp_path):
        spec = micro_spec(study="pairing_ablation")
        raw = X.study_pairing_ablation(spec, tmp_path)
        assert len(raw) == len(spec.strategies) * len(spec.seeds)
        for r in raw:
            if r["strategy"] == "augmented":
                assert r["aepe_gain_pct"] == 0.0
                assert r["delta1_gain_pct"] == 0.0
        rows = read_csv_rows(tmp_path / "raw.csv")
        assert {r["strategy"] for r in rows} == set(spec.strategies)
        summary = read_csv_rows(tmp_path / "summary.csv")
        raw_by_strat = {}
        for r in rows:
            raw_by_strat.setdefault(r["strategy"], []).append(float(r["aepe"]))
        for s in summary:
            assert float(s["aepe_mean"]) == pytest.approx(
                np.mean(raw_by_strat[s["strategy"]]))

    def test_sweep_grid_and_best_cell(self, tmp_path):
        spec = micro_spec(study="sweep", strategies=["spatial"])
        raw = X.study_sweep(spec, tmp_path)
        assert len(raw) == len(spec.maskings) * len(spec.jaccards) * len(spec.seeds)
        best = json.loads((tmp_path / "best.json").read_text())
        summary = X.summarize(raw, ["m", "j"], ["delta1", "absrel"])
        expect = max(summary, key=lambda s: s["delta1_mean"])
        assert best["m"] == expect["m"] and best["j"] == expect["j"]

    def test_life_size_rows_and_duplicates(self, tmp_path):
        spec = micro_spec(study="life_size", durations=[6.0, 6.0], steps=8)
        raw = X.study_life_size(spec, tmp_path)
        assert len(raw) == 2  # duplicate durations: duplicate rows
        assert raw[0]["cas_ref"] == raw[1]["cas_ref"]  # identical within seed
        rows = read_csv_rows(tmp_path / "raw.csv")
        assert len(rows) == len(spec.durations) * len(spec.seeds)

    def test_nonlife_control_schema(self, tmp_path):
        spec = micro_spec(study="nonlife_control", steps=8)
        raw = X.study_nonlife_control(spec, tmp_path)
        assert {r["traj"] for r in raw} == {"static", "walk"}
        for r in raw:
            assert set(r) >= {"life_id", "traj", "cas_ref", "final_loss", "seed"}

    def test_run_study_dispatch_and_resume(self, tmp_path):
        spec = micro_spec(study="sweep", jaccards=[0.5], steps=6)
        out1 = X.run_study(spec, tmp_path / "s")
        n_cells = len(list((tmp_path / "s" / "cells").glob("*.json")))
        out2 = X.run_study(spec, tmp_path / "s")  # resumes, no retrain
        assert out1 == out2
        assert len(list((tmp_path / "s" / "cells").glob("*.json"))) == n_cells
