"""Scripted studies: alignment vs life size, non-life controls, pairing-strategy
ablation, and the masking/Jaccard sweep.

A study spec is a flat key=value file (same grammar as the CLI --config
overlay), e.g.

    study = pairing_ablation
    seeds = [0, 1, 2]
    strategies = ["augmented", "random", "temporal", "spatial", "union"]
    duration = 120
    steps = 800

Studies write `raw.csv` (one row per grid cell and seed), `summary.csv`
(mean/std per cell recomputed from the raw rows) and `plots/*.svg` under the
output directory. Finished cells are cached as JSON keyed by a hash of the
cell configuration, so interrupted studies resume instead of retraining.

The "reference" model, standing in for a model trained on diverse web data,
is trained on temporal pairs pooled from several distinct worlds.
"""

from __future__ import annotations

import csv
import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .. import pairing as P
from ..alignment import build_testset, cas_over_testset, load_model, null_baseline
from ..cli.plot import line_svg, scatter_svg, write_svg
from ..errors import ConfigError, ContractError
from ..evalharness import (ProbeConfig, depth_items_from_life,
                           eval_zeroshot_correspondence, make_flow_eval_pairs,
                           train_probe)
from ..model import ArchConfig
from ..seeding import derive_seed
from ..synthlife import TrajectorySpec, export_life, generate_life, generate_world
from ..trainer import TrainConfig, train

STUDIES = ("life_size", "nonlife_control", "pairing_ablation", "sweep")


@dataclass
class StudySpec:
    study: str = "pairing_ablation"
    name: str = ""
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    world_seed: int = 101
    duration: float = 120.0
    fps: float = 5.0
    image_size: int = 64
    landmarks: int = 18
    points: int = 500
    steps: int = 800
    batch: int = 16
    lr: float = 1.5e-4
    masking: float = 0.95
    strategies: list = field(default_factory=lambda: ["augmented", "random",
                                                      "temporal", "spatial", "union"])
    durations: list = field(default_factory=lambda: [30.0, 120.0])
    trajectories: list = field(default_factory=lambda: ["static", "walk"])
    maskings: list = field(default_factory=lambda: [0.5, 0.7, 0.9])
    jaccards: list = field(default_factory=lambda: [0.5, 0.7, 0.9])
    sweep_pairing: str = "spatial"
    gap: list = field(default_factory=lambda: [1, 10])
    spatial_min_gap: int | None = None   # frames; None: 5 seconds
    per_anchor: int = 2
    n_mined_pairs: int = 400
    ref_world_seeds: list = field(default_factory=lambda: [201, 202, 203, 204])
    ref_steps: int = 0            # 0: same as steps
    testset_pairs: int = 40
    eval_pairs: int = 30
    probe_steps: int = 600
    probe_train_frames: int = 120
    probe_eval_frames: int = 40

    def __post_init__(self):
        if self.study not in STUDIES:
            raise ConfigError(f"unknown study {self.study!r}; choose from {STUDIES}")
        if not self.name:
            self.name = self.study
        if not self.seeds:
            raise ConfigError("study needs at least one seed")
        for m in list(self.maskings) + [self.masking]:
            if not (0.0 <= m < 1.0):
                raise ConfigError(f"masking ratio {m} outside [0, 1)")
        for j in self.jaccards:
            if not (0.0 < j <= 1.0):
                raise ConfigError(f"jaccard threshold {j} outside (0, 1]")
        if not self.durations or not self.strategies or not self.trajectories:
            raise ConfigError("study grid must be non-empty")

    def arch(self, masking=None) -> ArchConfig:
        return ArchConfig(image_size=self.image_size,
                          masking_ratio=self.masking if masking is None else masking)

    def train_cfg(self, seed, steps=None) -> TrainConfig:
        return TrainConfig(total_steps=steps or self.steps, batch_size=self.batch,
                           base_lr=self.lr, seed=seed)


def load_study_spec(path) -> StudySpec:
    from ..cli.main import parse_kv_config
    values = parse_kv_config(Path(path).read_text())
    known = set(StudySpec.__dataclass_fields__)
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown study spec keys: {sorted(unknown)}")
    return StudySpec(**values)


def cell_key(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def run_cell(cells_dir: Path, payload: dict, fn) -> dict:
    """Run one grid cell unless a finished artifact for this config exists."""
    cells_dir.mkdir(parents=True, exist_ok=True)
    path = cells_dir / f"{cell_key(payload)}.json"
    if path.exists():
        return json.loads(path.read_text())
    row = fn()
    path.write_text(json.dumps({**payload, **row}, sort_keys=True,
                               separators=(",", ":")) + "\n")
    return {**payload, **row}


def _life_dir(spec: StudySpec, root: Path, world_seed: int, traj: str,
              duration: float, seed: int, tag: str = "") -> Path:
    out = root / "lives" / f"{tag}w{world_seed}-{traj}-d{duration:g}-s{seed}"
    if not (out / "manifest.jsonl").exists():
        world = generate_world(seed=world_seed, n_landmarks=spec.landmarks,
                               n_points=spec.points)
        life = generate_life(world, TrajectorySpec(kind=traj), duration_s=duration,
                             fps=spec.fps, image_size=spec.image_size,
                             seed=derive_seed(seed, "life", traj, world_seed),
                             life_id=out.name)
        export_life(life, out)
    return out


def _load(root_dir: Path):
    from ..synthlife import load_life
    return load_life(root_dir)


def mine_pairs(life, strategy: str, spec: StudySpec, seed: int,
               j_threshold: float | None = None) -> P.PairIndex:
    gap = (int(spec.gap[0]), int(spec.gap[1]))
    if strategy == "temporal":
        return P.temporal_pairs(life, gap, spec.per_anchor, seed)
    if strategy == "spatial":
        return P.spatial_pairs(life, j_threshold or 0.7,
                               min_frame_gap=spec.spatial_min_gap, seed=seed)
    if strategy == "union":
        return P.union_pairs(
            P.temporal_pairs(life, gap, spec.per_anchor, seed),
            P.spatial_pairs(life, j_threshold or 0.7,
                            min_frame_gap=spec.spatial_min_gap, seed=seed))
    if strategy == "augmented":
        n = min(spec.n_mined_pairs, len(life.frames))
        return P.augmented_pairs(life, n, seed=seed)
    if strategy == "random":
        return P.random_pairs(life, spec.n_mined_pairs, seed)
    raise ConfigError(f"unknown strategy {strategy!r}")


def train_tagged(root: Path, tag: str, index: P.PairIndex, arch: ArchConfig,
                 cfg: TrainConfig, life_dir: Path) -> Path:
    """Train (or reuse) a checkpoint cached by its full configuration."""
    key = cell_key({"tag": tag, "arch": arch.to_dict(), "steps": cfg.total_steps,
                    "batch": cfg.batch_size, "lr": cfg.base_lr, "seed": cfg.seed,
                    "pairs": len(index), "life": life_dir.name})
    out = root / "models" / f"{tag}-{key}"
    final = out / f"ckpt_{cfg.total_steps}.slck"
    if not final.exists():
        result = train(index, arch, cfg, life_dir, out)
        final = result.checkpoints[-1]
    return final


def final_loss_drop(out_dir: Path) -> tuple:
    """(first-window mean, last-window mean) from a run's loss log."""
    log = out_dir / "loss_log.csv"
    rows = [float(line.split(",")[2]) for line in log.read_text().splitlines()[1:]
            if line]
    w = max(min(50, len(rows) // 4), 1)
    return float(np.mean(rows[:w])), float(np.mean(rows[-w:]))


def reference_checkpoint(spec: StudySpec, root: Path) -> Path:
    """Model trained on temporal pairs pooled from several distinct worlds
    (the stand-in for a diverse-data reference)."""
    pooled_dir = root / "ref" / "pooled"
    index_parts = []
    if not (pooled_dir / "manifest.jsonl").exists():
        pooled_dir.mkdir(parents=True, exist_ok=True)
        (pooled_dir / "images").mkdir(exist_ok=True)
        manifest = []
        offset = 0
        per_world = max(spec.duration / len(spec.ref_world_seeds), 10.0)
        for ws in spec.ref_world_seeds:
            world = generate_world(seed=ws, n_landmarks=spec.landmarks,
                                   n_points=spec.points)
            life = generate_life(world, TrajectorySpec(kind="walk"),
                                 duration_s=per_world, fps=spec.fps,
                                 image_size=spec.image_size,
                                 seed=derive_seed(ws, "ref_life"))
            idx = P.temporal_pairs(life, (int(spec.gap[0]), int(spec.gap[1])),
                                   spec.per_anchor, seed=ws)
            from ..synthlife.io import write_ppm
            for fr in life.frames:
                name = f"{offset + fr.frame_id:06d}"
                write_ppm(pooled_dir / "images" / f"{name}.ppm", fr.image)
                manifest.append(json.dumps(
                    {"frame_id": offset + fr.frame_id,
                     "timestamp": (offset + fr.frame_id) / spec.fps,
                     "image": f"images/{name}.ppm", "pose": None},
                    sort_keys=True, separators=(",", ":")))
            index_parts += [P.FramePair(p.source_id + offset, p.target_id + offset,
                                        P.TEMPORAL) for p in idx.pairs]
            offset += len(life.frames)
        (pooled_dir / "manifest.jsonl").write_text("\n".join(manifest) + "\n")
        (pooled_dir / "pairs.json").write_text(json.dumps(
            [[p.source_id, p.target_id] for p in index_parts]) + "\n")
    pairs = [P.FramePair(s, t, P.TEMPORAL) for s, t in
             json.loads((pooled_dir / "pairs.json").read_text())]
    index = P.PairIndex("pooled", pairs)
    cfg = spec.train_cfg(seed=derive_seed(spec.world_seed, "ref_train"),
                         steps=spec.ref_steps or spec.steps)
    return train_tagged(root, "reference", index, spec.arch(), cfg, pooled_dir)


def study_testset(spec: StudySpec, root: Path):
    """Held-out world testset shared by all CAS evaluations of a study."""
    world_seed = spec.world_seed + 1000
    life_dir = _life_dir(spec, root, world_seed, "walk",
                         max(spec.duration / 2, 20.0), seed=999, tag="heldout-")
    return build_testset([_load(life_dir)], pairs_per_life=spec.testset_pairs,
                         gap_frames=(int(spec.gap[0]), int(spec.gap[1])), seed=7)


def _write_csv(path: Path, header: list, rows: list):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        for row in rows:
            w.writerow(row)


def summarize(raw_rows: list, group_cols: list, value_cols: list) -> list:
    """mean/std per group, recomputed from raw rows."""
    groups: dict = {}
    for row in raw_rows:
        key = tuple(row[c] for c in group_cols)
        groups.setdefault(key, []).append(row)
    out = []
    for key in sorted(groups, key=str):
        rows = groups[key]
        summary = dict(zip(group_cols, key))
        summary["n"] = len(rows)
        for col in value_cols:
            vals = np.array([r[col] for r in rows], dtype=float)
            summary[f"{col}_mean"] = float(vals.mean())
            summary[f"{col}_std"] = float(vals.std())
        out.append(summary)
    return out


def _emit(out: Path, raw_rows: list, group_cols: list, value_cols: list):
    all_cols = list(raw_rows[0].keys())
    _write_csv(out / "raw.csv", all_cols, [[r[c] for c in all_cols] for r in raw_rows])
    summary = summarize(raw_rows, group_cols, value_cols)
    s_cols = list(summary[0].keys())
    _write_csv(out / "summary.csv", s_cols, [[s[c] for c in s_cols] for s in summary])
    return summary


def study_life_size(spec: StudySpec, out: Path, threads: int = 1) -> list:
    """Alignment to the multi-world reference as a function of life duration."""
    root = out
    ref = reference_checkpoint(spec, root)
    testset = study_testset(spec, root)
    ref_model = load_model(ref, model_id="reference")
    cells = []
    for duration in spec.durations:
        for seed in spec.seeds:
            payload = {"study": "life_size", "duration": float(duration), "seed": seed,
                       "steps": 0 if duration == 0 else spec.steps}

            def cell(duration=duration, seed=seed, payload=payload):
                d = max(float(duration), 2.0 / spec.fps)
                life_dir = _life_dir(spec, root, spec.world_seed, "walk", d, seed)
                life = _load(life_dir)
                index = mine_pairs(life, "temporal", spec, seed)
                cfg = spec.train_cfg(seed, steps=payload["steps"])
                ckpt = train_tagged(root, f"lifesize-d{duration:g}-s{seed}", index,
                                    spec.arch(), cfg, life_dir)
                model = load_model(ckpt)
                score = cas_over_testset(model, ref_model, testset)
                first, last = (float("nan"), float("nan")) if payload["steps"] == 0 \
                    else final_loss_drop(ckpt.parent)
                return {"cas_ref": score, "first_loss": first, "final_loss": last}

            cells.append((payload, cell))
    raw = _run_cells(out, cells, threads)
    _emit(out, raw, ["duration"], ["cas_ref"])
    xs = [r["duration"] for r in raw]
    ys = [r["cas_ref"] for r in raw]
    order = np.argsort(xs)
    (out / "plots").mkdir(exist_ok=True)
    write_svg(line_svg(np.asarray(xs)[order], np.asarray(ys)[order],
                       "life duration (s)", "CAS vs reference"),
              out / "plots" / "life_size.svg")
    return raw


def study_nonlife_control(spec: StudySpec, out: Path, threads: int = 1) -> list:
    """Life vs non-life (static camera) alignment to the reference."""
    root = out
    ref = reference_checkpoint(spec, root)
    testset = study_testset(spec, root)
    ref_model = load_model(ref, model_id="reference")
    cells = []
    for traj in spec.trajectories:
        for seed in spec.seeds:
            payload = {"study": "nonlife_control", "traj": traj, "seed": seed}

            def cell(traj=traj, seed=seed):
                life_dir = _life_dir(spec, root, spec.world_seed, traj, spec.duration,
                                     seed)
                life = _load(life_dir)
                index = mine_pairs(life, "temporal", spec, seed)
                ckpt = train_tagged(root, f"control-{traj}-s{seed}", index, spec.arch(),
                                    spec.train_cfg(seed), life_dir)
                first, last = final_loss_drop(ckpt.parent)
                score = cas_over_testset(load_model(ckpt), ref_model, testset)
                return {"life_id": life.life_id, "cas_ref": score,
                        "first_loss": first, "final_loss": last}

            cells.append((payload, cell))
    raw = _run_cells(out, cells, threads)
    _emit(out, raw, ["traj"], ["cas_ref", "final_loss"])
    return raw


def _ablation_metrics(spec: StudySpec, root: Path, ckpt: Path, eval_life,
                      eval_pairs, seed: int) -> dict:
    model = load_model(ckpt)
    corr = eval_zeroshot_correspondence(model, eval_pairs, seed=seed)
    items = depth_items_from_life(eval_life)
    n_train = min(spec.probe_train_frames, len(items) - spec.probe_eval_frames)
    pcfg = ProbeConfig(steps=spec.probe_steps, seed=seed)
    _, report, _ = train_probe(model, items[:n_train],
                               items[n_train:n_train + spec.probe_eval_frames], pcfg)
    return {"aepe": corr["metrics"]["aepe"], "delta1": report.delta1,
            "absrel": report.absrel}


def study_pairing_ablation(spec: StudySpec, out: Path, threads: int = 1) -> list:
    """Relative gains of each pairing strategy over the augmented baseline."""
    root = out
    eval_world = spec.world_seed + 2000
    eval_dir = _life_dir(spec, root, eval_world, "walk", max(spec.duration / 2, 20.0),
                         seed=998, tag="eval-")
    eval_life = _load(eval_dir)
    eval_pairs = make_flow_eval_pairs(eval_life, spec.eval_pairs, seed=5)
    cells = []
    for strategy in spec.strategies:
        for seed in spec.seeds:
            payload = {"study": "pairing_ablation", "strategy": strategy, "seed": seed}

            def cell(strategy=strategy, seed=seed):
                life_dir = _life_dir(spec, root, spec.world_seed, "walk", spec.duration,
                                     seed)
                life = _load(life_dir)
                index = mine_pairs(life, strategy, spec, seed)
                ckpt = train_tagged(root, f"ablate-{strategy}-s{seed}", index,
                                    spec.arch(), spec.train_cfg(seed), life_dir)
                return _ablation_metrics(spec, root, ckpt, eval_life, eval_pairs, seed)

            cells.append((payload, cell))
    raw = _run_cells(out, cells, threads)
    if "augmented" in spec.strategies:
        base = {r["seed"]: r for r in raw if r["strategy"] == "augmented"}
        for r in raw:
            b = base[r["seed"]]
            r["aepe_gain_pct"] = 100.0 * (b["aepe"] - r["aepe"]) / b["aepe"]
            r["delta1_gain_pct"] = 100.0 * (r["delta1"] - b["delta1"]) \
                / max(b["delta1"], 1e-9)
            r["absrel_gain_pct"] = 100.0 * (b["absrel"] - r["absrel"]) \
                / max(b["absrel"], 1e-9)
    _emit(out, raw, ["strategy"], [c for c in raw[0] if c.endswith(("pct", "aepe",
                                                                    "delta1",
                                                                    "absrel"))])
    return raw


def study_sweep(spec: StudySpec, out: Path, threads: int = 1) -> list:
    """Masking-ratio x Jaccard-threshold grid for overlap-based pairing."""
    root = out
    eval_world = spec.world_seed + 2000
    eval_dir = _life_dir(spec, root, eval_world, "walk", max(spec.duration / 2, 20.0),
                         seed=998, tag="eval-")
    eval_life = _load(eval_dir)
    cells = []
    for m in spec.maskings:
        for j in spec.jaccards:
            for seed in spec.seeds:
                payload = {"study": "sweep", "m": float(m), "j": float(j), "seed": seed}

                def cell(m=m, j=j, seed=seed):
                    life_dir = _life_dir(spec, root, spec.world_seed, "walk",
                                         spec.duration, seed)
                    life = _load(life_dir)
                    index = mine_pairs(life, spec.sweep_pairing, spec, seed,
                                       j_threshold=j)
                    ckpt = train_tagged(root, f"sweep-m{m}-j{j}-s{seed}", index,
                                        spec.arch(masking=m), spec.train_cfg(seed),
                                        life_dir)
                    items = depth_items_from_life(eval_life)
                    n_train = min(spec.probe_train_frames,
                                  len(items) - spec.probe_eval_frames)
                    pcfg = ProbeConfig(steps=spec.probe_steps, seed=seed)
                    _, report, _ = train_probe(load_model(ckpt), items[:n_train],
                                               items[n_train:n_train +
                                                     spec.probe_eval_frames], pcfg)
                    return {"delta1": report.delta1, "absrel": report.absrel}

                cells.append((payload, cell))
    raw = _run_cells(out, cells, threads)
    summary = _emit(out, raw, ["m", "j"], ["delta1", "absrel"])
    best = max(summary, key=lambda s: s["delta1_mean"])
    (out / "best.json").write_text(json.dumps(
        {"m": best["m"], "j": best["j"], "delta1_mean": best["delta1_mean"]},
        sort_keys=True) + "\n")
    return raw


def _run_cells(out: Path, cells: list, threads: int) -> list:
    cells_dir = out / "cells"

    def run_one(item):
        payload, fn = item
        return run_cell(cells_dir, payload, fn)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run_one, cells))
    return [run_one(c) for c in cells]


def run_study(spec: StudySpec, out_dir, threads: int = 1) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    fn = {"life_size": study_life_size, "nonlife_control": study_nonlife_control,
          "pairing_ablation": study_pairing_ablation, "sweep": study_sweep}[spec.study]
    fn(spec, out, threads)
    (out / "spec.json").write_text(json.dumps(asdict(spec), sort_keys=True) + "\n")
    return out
