import hashlib

import numpy as np
import pytest

from singlelife import alignment as A
from singlelife import evalharness as E
from singlelife import model as M
from singlelife import synthlife as S
from singlelife.alignment.extract import CorrespondenceMap
from singlelife.errors import ContractError


def diag_map(n=16, grid=4):
    scores = np.eye(n) + 0.01 * np.random.default_rng(0).random((n, n))
    return CorrespondenceMap(scores=scores, source_grid=grid, target_grid=grid)


class TestAttentionToFlow:
    def test_identity_map_zero_flow(self):
        field = E.attention_to_flow(diag_map(), patch_size=8)
        assert (field.flow == 0).all()

    def test_shifted_column_uniform_flow(self):
        # patch (r, c) matched to (r, c+1): flow = (patch_size, 0)
        g = 4
        n = g * g
        scores = np.zeros((n, n))
        for r in range(g):
            for c in range(g):
                scores[r * g + c, r * g + min(c + 1, g - 1)] = 1.0
        corr = CorrespondenceMap(scores=scores, source_grid=g, target_grid=g)
        field = E.attention_to_flow(corr, patch_size=8)
        inner = field.flow[:, : 3 * 8]  # skip the clamped last column
        assert (inner[..., 0] == 8.0).all()
        assert (field.flow[..., 1] == 0.0).all()

    def test_soft_mode_on_one_hot_equals_argmax(self):
        g, n = 4, 16
        rng = np.random.default_rng(1)
        scores = np.full((n, n), -1e4)
        scores[np.arange(n), rng.integers(0, n, size=n)] = 1e4
        corr = CorrespondenceMap(scores=scores, source_grid=g, target_grid=g)
        hard = E.attention_to_flow(corr, 8, mode="argmax")
        soft = E.attention_to_flow(corr, 8, mode="soft")
        np.testing.assert_allclose(soft.flow, hard.flow, atol=1e-6)

    def test_argmax_invariant_under_monotone_row_transform(self):
        rng = np.random.default_rng(2)
        scores = rng.random((16, 16))
        a = CorrespondenceMap(scores=scores, source_grid=4, target_grid=4)
        b = CorrespondenceMap(scores=np.exp(3.0 * scores), source_grid=4, target_grid=4)
        fa = E.attention_to_flow(a, 8)
        fb = E.attention_to_flow(b, 8)
        assert (fa.flow == fb.flow).all()


class TestAepe:
    def _field(self, arr, valid=None):
        f = np.asarray(arr, dtype=np.float32)
        v = np.ones(f.shape[:2], dtype=bool) if valid is None else valid
        return E.FlowField(flow=f, valid=v)

    def test_identical_zero(self):
        rng = np.random.default_rng(3)
        f = rng.random((6, 6, 2))
        assert E.aepe(self._field(f), self._field(f)) == 0.0

    def test_three_four_five(self):
        a = np.zeros((4, 4, 2))
        b = np.zeros((4, 4, 2))
        b[..., 0], b[..., 1] = 3.0, 4.0
        assert E.aepe(self._field(a), self._field(b)) == pytest.approx(5.0)

    def test_flat_loop_oracle(self):
        rng = np.random.default_rng(4)
        a, b = rng.random((5, 7, 2)), rng.random((5, 7, 2))
        valid = rng.random((5, 7)) > 0.3
        got = E.aepe(self._field(a, valid), self._field(b, valid))
        total, count = 0.0, 0
        for y in range(5):
            for x in range(7):
                if valid[y, x]:
                    d = a[y, x] - b[y, x]
                    total += np.sqrt(d[0] ** 2 + d[1] ** 2)
                    count += 1
        assert got == pytest.approx(total / count, abs=1e-6)

    def test_no_valid_pixels(self):
        empty = np.zeros((3, 3), dtype=bool)
        with pytest.raises(ContractError):
            E.aepe(self._field(np.zeros((3, 3, 2)), empty),
                   self._field(np.zeros((3, 3, 2)), empty))


class TestDepthMetrics:
    def test_delta1_exact(self):
        gt = np.array([1.0, 2.0, 2.0])
        pred = np.array([1.0, 2.0, 4.0])
        mask = np.ones(3, dtype=bool)
        assert E.delta1(pred, gt, mask) == pytest.approx(2 / 3)

    def test_delta1_perfect_and_ratio_boundary(self):
        gt = np.full(5, 2.0)
        assert E.delta1(gt, gt, np.ones(5, bool)) == 1.0
        assert E.delta1(1.3 * gt, gt, np.ones(5, bool)) == 0.0

    def test_delta1_scale_symmetric(self):
        rng = np.random.default_rng(5)
        gt = rng.uniform(1, 5, size=20)
        pred = rng.uniform(1, 5, size=20)
        m = np.ones(20, bool)
        assert E.delta1(pred, gt, m) == E.delta1(3.7 * pred, 3.7 * gt, m)

    def test_absrel_hand_values(self):
        assert E.absrel(np.array([1.0, 3.0]), np.array([2.0, 2.0]),
                        np.ones(2, bool), eps=0.0) == pytest.approx(0.5)
        assert E.absrel(np.array([2.0]), np.array([1.0]), np.ones(1, bool),
                        eps=0.0) == pytest.approx(1.0)
        gt = np.array([1.0, 2.0])
        assert E.absrel(gt, gt, np.ones(2, bool)) == pytest.approx(0.0)

    def test_absrel_flat_loop_oracle(self):
        rng = np.random.default_rng(6)
        gt = rng.uniform(0.5, 8, size=(4, 4))
        pred = rng.uniform(0.5, 8, size=(4, 4))
        mask = rng.random((4, 4)) > 0.4
        got = E.absrel(pred, gt, mask, eps=1e-8)
        vals = [abs(pred[i, j] - gt[i, j]) / (gt[i, j] + 1e-8)
                for i in range(4) for j in range(4) if mask[i, j]]
        assert got == pytest.approx(float(np.mean(vals)), abs=1e-9)

    def test_nonpositive_depth_rejected(self):
        with pytest.raises(ContractError):
            E.delta1(np.array([0.0]), np.array([1.0]), np.ones(1, bool))
        with pytest.raises(ContractError):
            E.absrel(np.array([1.0]), np.array([-1.0]), np.ones(1, bool))


class TestUpsample:
    def test_constant_field_preserved(self):
        w = E.bilinear_upsample_matrix(grid=4, patch_size=8)
        patch_vals = np.full(16, 3.3, dtype=np.float32)
        px = patch_vals @ w
        np.testing.assert_allclose(px, 3.3, rtol=1e-6)

    def test_partition_of_unity(self):
        w = E.bilinear_upsample_matrix(grid=8, patch_size=8)
        np.testing.assert_allclose(w.sum(axis=0), 1.0, atol=1e-6)

    def test_linear_ramp_reproduced_between_centers(self):
        # per-column values 0..3: pixel j interpolates at (j + 0.5 - 2) / 4,
        # clamped to the outer patch centers
        w = E.bilinear_upsample_matrix(grid=4, patch_size=4)
        vals = np.arange(4, dtype=np.float32)
        patch_vals = np.tile(vals, 4)
        px = (patch_vals @ w).reshape(16, 16)
        for j in range(16):
            expect = np.clip((j + 0.5 - 2.0) / 4.0, 0.0, 3.0)
            assert px[0, j] == pytest.approx(expect, abs=1e-6), j


@pytest.fixture(scope="module")
def flow_world_life():
    world = S.generate_world(seed=41, n_landmarks=10, n_points=150, bounds=(14, 4, 14))
    life = S.generate_life(world, S.TrajectorySpec(kind="walk"), duration_s=8.0,
                           fps=4.0, image_size=32, seed=1)
    return world, life


class TestEvalPairs:
    def test_make_pairs_and_round_trip(self, flow_world_life, tmp_path):
        _, life = flow_world_life
        pairs = E.make_flow_eval_pairs(life, n_pairs=4, gap_frames=(1, 5), seed=0)
        assert len(pairs) == 4
        for p in pairs:
            assert p.gt_flow.valid.mean() >= 0.25
        tsv = E.write_eval_pairs(pairs, tmp_path / "pairs")
        back = E.read_eval_pairs(tsv)
        assert len(back) == 4
        for a, b in zip(pairs, back):
            assert (a.gt_flow.valid == b.gt_flow.valid).all()
            np.testing.assert_allclose(a.gt_flow.flow, b.gt_flow.flow, atol=1e-6)
            assert np.abs(a.source - b.source).max() <= 0.5 / 255 + 1e-6

    def test_zeroshot_report_structure(self, flow_world_life):
        _, life = flow_world_life
        arch = M.ArchConfig(image_size=32, patch_size=8, enc_blocks=1, enc_dim=16,
                            enc_heads=2, dec_blocks=1, dec_dim=16, dec_heads=2,
                            masking_ratio=0.5)
        model = A.LoadedModel("t", arch, M.init_params(arch, seed=0))
        pairs = E.make_flow_eval_pairs(life, n_pairs=3, gap_frames=(1, 4), seed=1)
        report = E.eval_zeroshot_correspondence(model, pairs, seed=0)
        assert report["n_items"] == 3
        assert report["metrics"]["aepe"] > 0
        assert report["metrics"]["aepe_random_baseline"] > 0
        assert len(report["per_pair"]) == 3

    def test_eval_deterministic(self, flow_world_life):
        _, life = flow_world_life
        arch = M.ArchConfig(image_size=32, patch_size=8, enc_blocks=1, enc_dim=16,
                            enc_heads=2, dec_blocks=1, dec_dim=16, dec_heads=2,
                            masking_ratio=0.5)
        model = A.LoadedModel("t", arch, M.init_params(arch, seed=0))
        pairs = E.make_flow_eval_pairs(life, n_pairs=2, gap_frames=(1, 4), seed=2)
        r1 = E.eval_zeroshot_correspondence(model, pairs, seed=5)
        r2 = E.eval_zeroshot_correspondence(model, pairs, seed=5)
        assert r1["per_pair"] == r2["per_pair"]
        assert r1["per_pair_random"] == r2["per_pair_random"]


def params_hash(params):
    h = hashlib.sha256()
    for k in sorted(params):
        h.update(k.encode())
        h.update(params[k].tobytes())
    return h.hexdigest()


@pytest.fixture(scope="module")
def depth_setup():
    world = S.generate_world(seed=51, n_landmarks=10, n_points=100, bounds=(14, 4, 14))
    life = S.generate_life(world, S.TrajectorySpec(kind="indoor"), duration_s=10.0,
                           fps=4.0, image_size=32, seed=2)
    arch = M.ArchConfig(image_size=32, patch_size=8, enc_blocks=2, enc_dim=32,
                        enc_heads=2, dec_blocks=2, dec_dim=32, dec_heads=2,
                        masking_ratio=0.75)
    model = A.LoadedModel("enc", arch, M.init_params(arch, seed=3))
    items = E.depth_items_from_life(life)
    return model, items[:30], items[30:40]


class TestProbe:
    def test_frozen_mode_leaves_encoder_untouched(self, depth_setup):
        model, train_items, eval_items = depth_setup
        before = params_hash(model.params)
        cfg = E.ProbeConfig(hidden=32, heads=2, steps=20, batch_size=4, seed=0)
        _, report, model_out = E.train_probe(model, train_items, eval_items, cfg,
                                             mode="frozen")
        assert params_hash(model.params) == before
        assert model_out is model
        assert 0.0 <= report.delta1 <= 1.0 and report.absrel >= 0

    def test_constant_depth_easily_learned(self, depth_setup):
        model, _, _ = depth_setup
        rng = np.random.default_rng(0)
        img_size = model.arch.image_size
        items = [(rng.random((img_size, img_size, 3)).astype(np.float32),
                  np.full((img_size, img_size), 4.0, dtype=np.float32))
                 for _ in range(8)]
        cfg = E.ProbeConfig(hidden=32, heads=2, steps=500, batch_size=4, seed=1)
        _, report, _ = E.train_probe(model, items, items[:4], cfg, mode="frozen")
        assert report.delta1 == 1.0

    def test_finetune_mode_changes_encoder(self, depth_setup):
        model, train_items, eval_items = depth_setup
        before = params_hash(model.params)
        cfg = E.ProbeConfig(hidden=32, heads=2, steps=5, batch_size=2, seed=2)
        _, _, model_out = E.train_probe(model, train_items, eval_items, cfg,
                                        mode="finetune")
        assert params_hash(model.params) == before  # original untouched
        assert params_hash(model_out.params) != before

    def test_probe_deterministic(self, depth_setup):
        model, train_items, eval_items = depth_setup
        cfg = E.ProbeConfig(hidden=32, heads=2, steps=10, batch_size=4, seed=3)
        p1, r1, _ = E.train_probe(model, train_items, eval_items, cfg, mode="frozen")
        p2, r2, _ = E.train_probe(model, train_items, eval_items, cfg, mode="frozen")
        assert params_hash(p1) == params_hash(p2)
        assert r1.delta1 == r2.delta1 and r1.absrel == r2.absrel


def test_report_json_round_trip(tmp_path):
    report = {"task": "zeroshot_correspondence", "model_id": "m", "per_pair": [1.0],
              "metrics": {"aepe": 1.0}, "config": {"mode": "argmax"}, "n_items": 1}
    path = E.write_report(report, tmp_path / "r.json")
    import json
    back = json.loads(path.read_text())
    assert back["metrics"]["aepe"] == 1.0
    assert "per_pair" not in back
