"""Zero-shot correspondence evaluation.

A trained model's correspondence map is turned into a dense flow field (top-1
or softmax-weighted target patch per source patch, nearest-neighbor upsampled
to pixels) and scored with the average end-point error against ground truth.
A random-matching baseline (uniform random target patch per source patch, same
pipeline) calibrates what "no correspondence" looks like.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..alignment.extract import CorrespondenceMap, LoadedModel, extract_map
from ..errors import ChannelError, ContractError
from ..seeding import rng_for
from ..synthlife.io import read_ppm, read_raster, write_ppm, write_raster
from ..synthlife.life import pairwise_flow

FLOW_MAGIC = b"SLFL"


@dataclass
class FlowField:
    flow: np.ndarray    # [H, W, 2] (dx, dy) pixels
    valid: np.ndarray   # [H, W] bool

    def __post_init__(self):
        if self.flow.ndim != 3 or self.flow.shape[-1] != 2:
            raise ContractError(f"flow must be [H, W, 2], got {self.flow.shape}")
        if not np.isfinite(self.flow[self.valid]).all():
            raise ContractError("flow must be finite on valid pixels")

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "FlowField":
        """NaN marks invalid pixels in raw arrays."""
        valid = np.isfinite(arr).all(axis=-1)
        flow = np.where(valid[..., None], arr, 0.0).astype(np.float32)
        return cls(flow=flow, valid=valid)

    def to_array(self) -> np.ndarray:
        out = self.flow.astype(np.float32).copy()
        out[~self.valid] = np.nan
        return out


def attention_to_flow(corr: CorrespondenceMap, patch_size: int,
                      mode: str = "argmax") -> FlowField:
    """Patch-level matches -> pixel flow (nearest-neighbor upsampling)."""
    scores = corr.scores
    g_s, g_t = corr.source_grid, corr.target_grid
    if scores.shape != (g_s * g_s, g_t * g_t):
        raise ContractError("map shape does not match the stated patch grids")
    centers_t = (np.stack([np.tile(np.arange(g_t), g_t),       # x per column
                           np.repeat(np.arange(g_t), g_t)], axis=1) + 0.5) * patch_size
    if mode == "argmax":
        # stable argmax = lowest index wins ties, matching the top-k rule
        best = np.argmax(scores, axis=1)
        matched = centers_t[best]
    elif mode == "soft":
        z = scores - scores.max(axis=1, keepdims=True)
        w = np.exp(z)
        w /= w.sum(axis=1, keepdims=True)
        matched = w @ centers_t
    else:
        raise ContractError(f"unknown flow mode {mode!r}")
    centers_s = (np.stack([np.tile(np.arange(g_s), g_s),
                           np.repeat(np.arange(g_s), g_s)], axis=1) + 0.5) * patch_size
    patch_flow = (matched - centers_s).reshape(g_s, g_s, 2)
    pixel_flow = np.repeat(np.repeat(patch_flow, patch_size, axis=0), patch_size, axis=1)
    return FlowField(flow=pixel_flow.astype(np.float32),
                     valid=np.ones(pixel_flow.shape[:2], dtype=bool))


def aepe(pred: FlowField, gt: FlowField) -> float:
    """Mean Euclidean end-point error over jointly valid pixels."""
    if pred.flow.shape != gt.flow.shape:
        raise ContractError(f"flow shapes disagree: {pred.flow.shape} vs {gt.flow.shape}")
    both = pred.valid & gt.valid
    if not both.any():
        raise ContractError("no valid pixels to score")
    diff = pred.flow[both] - gt.flow[both]
    return float(np.sqrt((diff * diff).sum(axis=-1)).mean())


@dataclass
class EvalPair:
    source: np.ndarray
    target: np.ndarray
    gt_flow: FlowField
    pair_id: str = ""


def make_flow_eval_pairs(life, n_pairs: int, gap_frames=(1, 8), seed: int = 0) -> list:
    """Frame pairs with analytic ground-truth flow from a life's pose+depth."""
    if not (life.channels.get("pose") and life.channels.get("depth")):
        raise ChannelError("flow eval pairs need pose and depth channels")
    rng = rng_for(seed, "flow_eval", life.life_id)
    n = len(life.frames)
    pairs = []
    seen = set()
    attempts = 0
    while len(pairs) < n_pairs and attempts < 50 * n_pairs:
        attempts += 1
        i = int(rng.integers(0, n - gap_frames[0]))
        j = i + int(rng.integers(gap_frames[0], gap_frames[1] + 1))
        if j >= n or (i, j) in seen:
            continue
        flow, covis = pairwise_flow(life, i, j)
        if covis.mean() < 0.25:  # needs real co-visibility to be a fair target
            continue
        seen.add((i, j))
        arr = flow.astype(np.float32).copy()
        arr[~covis] = np.nan
        pairs.append(EvalPair(source=life.frames[i].image, target=life.frames[j].image,
                              gt_flow=FlowField.from_array(arr),
                              pair_id=f"{life.life_id}:{i}->{j}"))
    if len(pairs) < n_pairs:
        raise ContractError(f"could only sample {len(pairs)} of {n_pairs} eval pairs "
                            "with sufficient co-visibility")
    return pairs


def random_matching_flow(arch_grid: int, patch_size: int, seed: int) -> FlowField:
    """Uniform random target patch per source patch, same upsampling pipeline."""
    rng = rng_for(seed, "random_matching")
    n = arch_grid * arch_grid
    scores = np.zeros((n, n))
    scores[np.arange(n), rng.integers(0, n, size=n)] = 1.0
    corr = CorrespondenceMap(scores=scores, source_grid=arch_grid, target_grid=arch_grid)
    return attention_to_flow(corr, patch_size)


def eval_zeroshot_correspondence(model: LoadedModel, eval_pairs, mode: str = "argmax",
                                 seed: int = 0) -> dict:
    """AEPE of the model and of the random-matching baseline over eval pairs."""
    if not eval_pairs:
        raise ContractError("no eval pairs given")
    per_pair, per_pair_random = [], []
    for i, pair in enumerate(eval_pairs):
        corr = extract_map(model, pair.source, pair.target, pair_id=pair.pair_id)
        pred = attention_to_flow(corr, model.arch.patch_size, mode=mode)
        per_pair.append(aepe(pred, pair.gt_flow))
        rand = random_matching_flow(model.arch.grid, model.arch.patch_size, seed=seed + i)
        per_pair_random.append(aepe(rand, pair.gt_flow))
    return {
        "task": "zeroshot_correspondence",
        "model_id": model.model_id,
        "metrics": {"aepe": float(np.mean(per_pair)),
                    "aepe_random_baseline": float(np.mean(per_pair_random))},
        "per_pair": per_pair,
        "per_pair_random": per_pair_random,
        "config": {"mode": mode, "seed": seed},
        "n_items": len(eval_pairs),
    }


HEADER = "source_path\ttarget_path\tflow_path"


def write_eval_pairs(pairs, out_dir) -> Path:
    """Persist eval pairs in the shared life file formats + a TSV listing."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = [HEADER]
    for i, p in enumerate(pairs):
        sp, tp = f"{i:04d}_src.ppm", f"{i:04d}_tgt.ppm"
        write_ppm(out / sp, p.source)
        write_ppm(out / tp, p.target)
        fp = ""
        if p.gt_flow is not None:
            fp = f"{i:04d}_flow.bin"
            write_raster(out / fp, p.gt_flow.to_array(), FLOW_MAGIC)
        lines.append(f"{sp}\t{tp}\t{fp}")
    (out / "pairs.tsv").write_text("\n".join(lines) + "\n")
    return out / "pairs.tsv"


def read_eval_pairs(tsv_path) -> list:
    tsv_path = Path(tsv_path)
    root = tsv_path.parent
    lines = tsv_path.read_text().splitlines()
    if not lines or lines[0] != HEADER:
        raise ContractError(f"{tsv_path} is not an eval pair list")
    pairs = []
    for i, line in enumerate(lines[1:]):
        if not line:
            continue
        sp, tp, fp = line.split("\t")
        gt = FlowField.from_array(read_raster(root / fp, FLOW_MAGIC)) if fp else None
        pairs.append(EvalPair(source=read_ppm(root / sp), target=read_ppm(root / tp),
                              gt_flow=gt, pair_id=f"{tsv_path.stem}:{i}"))
    return pairs
