"""Scratch calibration for the directional acceptance criteria (dev only)."""
import sys
import time
from pathlib import Path

import numpy as np

from singlelife import alignment as A
from singlelife import evalharness as E
from singlelife import model as M
from singlelife import pairing as P
from singlelife import synthlife as S
from singlelife import trainer as T

STEPS = int(sys.argv[1]) if len(sys.argv) > 1 else 500
ROOT = Path(sys.argv[2]) if len(sys.argv) > 2 else Path("/tmp/calib")
ROOT.mkdir(parents=True, exist_ok=True)
arch = M.desk_config()


def make_life(world_seed, traj, seed, duration=300.0):
    out = ROOT / f"life-w{world_seed}-{traj}-s{seed}"
    if not (out / "manifest.jsonl").exists():
        w = S.generate_world(seed=world_seed)
        life = S.generate_life(w, S.TrajectorySpec(kind=traj), duration_s=duration,
                               fps=5.0, image_size=64, seed=seed, life_id=out.name)
        S.export_life(life, out)
    return out


def train_on(tag, life_dir, strategy="temporal", seed=0, steps=STEPS):
    out = ROOT / f"model-{tag}-{steps}"
    ck = out / f"ckpt_{steps}.slck"
    if ck.exists():
        return ck
    life = S.load_life(life_dir)
    if strategy == "temporal":
        idx = P.temporal_pairs(life, (1, 10), 2, seed)
    else:
        idx = P.augmented_pairs(life, min(400, len(life.frames)), seed=seed)
    cfg = T.TrainConfig(total_steps=steps, batch_size=16, seed=seed)
    t0 = time.time()
    res = T.train(idx, arch, cfg, life_dir, out)
    losses = [l for _, _, l in res.log_rows]
    print(f"[{tag}] {steps} steps in {time.time()-t0:.0f}s  "
          f"loss {np.mean(losses[:100]):.4f} -> {np.mean(losses[-100:]):.4f}", flush=True)
    return ck


t_all = time.time()
la = make_life(301, "walk", 0)
lb = make_life(302, "walk", 100)
lstatic = make_life(301, "static", 0)
lt = make_life(399, "walk", 999)   # held-out world
print("lives ready", flush=True)

ck_a = train_on("A", la, seed=0)
ck_b = train_on("B", lb, seed=100)
ck_static = train_on("static", lstatic, seed=0)
ck_aug = train_on("AUG", la, strategy="augmented", seed=0)

life_t = S.load_life(lt)
testset = A.build_testset([life_t], pairs_per_life=30, gap_frames=(1, 10), seed=7)
ma = A.load_model(ck_a, "A")
mb = A.load_model(ck_b, "B")
mstatic = A.load_model(ck_static, "static")
maug = A.load_model(ck_aug, "AUG")
mr = A.LoadedModel("R", arch, M.init_params(arch, seed=555))

cache = ROOT / f"maps-{STEPS}"
kw = dict(k=5, threads=1, cache_dir=cache)
print(f"CAS(A,B)      = {A.cas_over_testset(ma, mb, testset, **kw):.4f}", flush=True)
print(f"CAS(A,R)      = {A.cas_over_testset(ma, mr, testset, **kw):.4f}", flush=True)
print(f"CAS(B,R)      = {A.cas_over_testset(mb, mr, testset, **kw):.4f}", flush=True)
print(f"CAS(static,A) = {A.cas_over_testset(mstatic, ma, testset, **kw):.4f}", flush=True)
print(f"CAS(aug,A)    = {A.cas_over_testset(maug, ma, testset, **kw):.4f}", flush=True)
print(f"null k/N      = {A.null_baseline(arch.n_patches):.4f}", flush=True)

pairs = E.make_flow_eval_pairs(life_t, 30, gap_frames=(4, 12), seed=5)
rep_a = E.eval_zeroshot_correspondence(ma, pairs, seed=0)
rep_r = E.eval_zeroshot_correspondence(mr, pairs, seed=0)
rep_aug = E.eval_zeroshot_correspondence(maug, pairs, seed=0)
gt_mag = np.mean([np.sqrt((p.gt_flow.flow[p.gt_flow.valid] ** 2).sum(-1)).mean()
                  for p in pairs])
print(f"gt |flow| mean      = {gt_mag:.2f} px", flush=True)
print(f"AEPE trained A      = {rep_a['metrics']['aepe']:.2f} "
      f"(random {rep_a['metrics']['aepe_random_baseline']:.2f})", flush=True)
print(f"AEPE untrained R    = {rep_r['metrics']['aepe']:.2f}", flush=True)
print(f"AEPE augmented      = {rep_aug['metrics']['aepe']:.2f}", flush=True)

from scipy import stats
t, p = stats.ttest_ind(rep_r["per_pair"], rep_r["per_pair_random"], equal_var=False)
print(f"untrained vs random t-test p = {p:.3f}", flush=True)

# depth probes: trained vs random encoder
items = E.depth_items_from_life(life_t)
pcfg = E.ProbeConfig(steps=600, seed=0)
_, rep_tr, _ = E.train_probe(ma, items[:150], items[150:200], pcfg)
_, rep_rd, _ = E.train_probe(mr, items[:150], items[150:200], pcfg)
_, rep_ag, _ = E.train_probe(maug, items[:150], items[150:200], pcfg)
print(f"probe delta1 trained={rep_tr.delta1:.3f} random={rep_rd.delta1:.3f} "
      f"augmented={rep_ag.delta1:.3f}", flush=True)
print(f"probe absrel trained={rep_tr.absrel:.3f} random={rep_rd.absrel:.3f} "
      f"augmented={rep_ag.absrel:.3f}", flush=True)
print(f"total {time.time()-t_all:.0f}s", flush=True)
