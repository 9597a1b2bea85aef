"""Stage-2 calibration: 2000-step models + criterion-7/8/10 design choices."""
import sys
import time
from pathlib import Path

import numpy as np
from scipy import stats

from singlelife import alignment as A
from singlelife import evalharness as E
from singlelife import model as M
from singlelife import pairing as P
from singlelife import synthlife as S
from singlelife import trainer as T
from singlelife.experiments import StudySpec, reference_checkpoint

ROOT = Path("/tmp/calib")
ROOT.mkdir(exist_ok=True)
STEPS = 2000
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
        idx = P.augmented_pairs(life, min(600, len(life.frames)), seed=seed)
    cfg = T.TrainConfig(total_steps=steps, batch_size=16, seed=seed)
    t0 = time.time()
    T.train(idx, arch, cfg, life_dir, out)
    print(f"[{tag}] {steps} steps in {time.time()-t0:.0f}s", flush=True)
    return ck


t0 = time.time()
la = make_life(301, "walk", 0)
lb = make_life(302, "walk", 100)
lstatic = make_life(301, "static", 200)
lt_walk = make_life(399, "walk", 999)
lt_indoor = make_life(398, "indoor", 888)

ck_a = train_on("A", la, seed=0)
ck_b = train_on("B", lb, seed=100)
ck_static = train_on("static", lstatic, seed=200)
ck_aug = train_on("AUG", la, strategy="augmented", seed=0)

spec = StudySpec(study="nonlife_control", seeds=[0], world_seed=301, duration=300.0,
                 fps=5.0, image_size=64, steps=STEPS, batch=16,
                 ref_world_seeds=[201, 202, 203, 204])
t1 = time.time()
ck_ref = reference_checkpoint(spec, ROOT / "accept")
print(f"[ref] ready in {time.time()-t1:.0f}s", flush=True)

ma = A.load_model(ck_a, "A")
mb = A.load_model(ck_b, "B")
mstatic = A.load_model(ck_static, "static")
maug = A.load_model(ck_aug, "AUG")
mref = A.load_model(ck_ref, "ref")

life_t = S.load_life(lt_walk)
testset = A.build_testset([life_t], pairs_per_life=50, gap_frames=(1, 10), seed=7)
cache = ROOT / "maps2000"
kw = dict(k=5, threads=1, cache_dir=cache)
print(f"CAS(A,B)       = {A.cas_over_testset(ma, mb, testset, **kw):.4f}", flush=True)
print(f"CAS(A,ref)     = {A.cas_over_testset(ma, mref, testset, **kw):.4f}", flush=True)
print(f"CAS(static,ref)= {A.cas_over_testset(mstatic, mref, testset, **kw):.4f}",
      flush=True)
for s in (900, 901, 902):
    mr = A.LoadedModel(f"R{s}", arch, M.init_params(arch, seed=s))
    print(f"CAS(A,R{s})   = {A.cas_over_testset(ma, mr, testset, **kw):.4f}", flush=True)

# criterion 7 design sweep
for gaps in ((2, 8), (4, 12)):
    pairs = E.make_flow_eval_pairs(life_t, 50, gap_frames=gaps, seed=5)
    gt_mag = np.mean([np.sqrt((p.gt_flow.flow[p.gt_flow.valid] ** 2).sum(-1)).mean()
                      for p in pairs])
    for mode in ("argmax", "soft"):
        rep = E.eval_zeroshot_correspondence(ma, pairs, mode=mode, seed=3)
        print(f"gaps={gaps} mode={mode}: AEPE(A)={rep['metrics']['aepe']:.2f} "
              f"random={rep['metrics']['aepe_random_baseline']:.2f} "
              f"gt|f|={gt_mag:.1f}", flush=True)
    rep_aug = E.eval_zeroshot_correspondence(maug, pairs, seed=3)
    print(f"gaps={gaps}: AEPE(AUG)={rep_aug['metrics']['aepe']:.2f}", flush=True)
    for s in (900, 901, 902):
        mr = A.LoadedModel(f"R{s}", arch, M.init_params(arch, seed=s))
        rep_r = E.eval_zeroshot_correspondence(mr, pairs, seed=3)
        tt, pv = stats.ttest_ind(rep_r["per_pair"], rep_r["per_pair_random"],
                                 equal_var=False)
        print(f"  untrained R{s}: AEPE={rep_r['metrics']['aepe']:.2f} "
              f"(random {rep_r['metrics']['aepe_random_baseline']:.2f}) p={pv:.4f}",
              flush=True)

# untrained argmax concentration
mr = A.LoadedModel("R900", arch, M.init_params(arch, seed=900))
pairs = E.make_flow_eval_pairs(life_t, 5, gap_frames=(2, 8), seed=5)
hist = np.zeros(64)
for p in pairs:
    mp = A.extract_map(mr, p.source, p.target)
    best = np.argmax(mp.scores, axis=1)
    for b in best:
        hist[b] += 1
print("untrained argmax histogram top5:", np.sort(hist)[-5:], "of", hist.sum(),
      flush=True)

# criterion 8: probes at 2000 steps on walk vs indoor eval lives
for name, lt in (("walk", lt_walk), ("indoor", lt_indoor)):
    life_depth = S.load_life(lt)
    items = E.depth_items_from_life(life_depth)
    pcfg = E.ProbeConfig(steps=2000, seed=0)
    for tag, model in (("trained", ma), ("random",
                                         A.LoadedModel("R", arch,
                                                       M.init_params(arch, seed=900))),
                       ("augment", maug)):
        _, rep, _ = E.train_probe(model, items[:150], items[150:200], pcfg)
        print(f"probe[{name}] {tag}: delta1={rep.delta1:.3f} absrel={rep.absrel:.3f}",
              flush=True)

print(f"total {time.time()-t0:.0f}s", flush=True)
