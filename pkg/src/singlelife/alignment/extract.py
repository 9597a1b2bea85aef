"""Correspondence-map extraction from trained models.

For an image pair, both images are encoded in full (no masking: queries need
target content, otherwise they collapse to position-only mask tokens) and the
decoder's pre-softmax cross-attention logits are captured per block and head.
Heads are averaged within each block, blocks are averaged, and the result is
transposed so that rows index SOURCE patches and columns index TARGET patches
(queries are target patches, so the raw matrix is target-major).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import ContractError
from ..model import (ArchConfig, as_tensors, decode, encode, full_visible_plan,
                     load_checkpoint, patchify)


@dataclass(frozen=True)
class LoadedModel:
    model_id: str
    arch: ArchConfig
    params: dict


def load_model(ckpt_path, model_id: str | None = None) -> LoadedModel:
    path = Path(ckpt_path)
    arch, params = load_checkpoint(path)
    return LoadedModel(model_id=model_id or path.stem, arch=arch, params=params)


@dataclass
class CorrespondenceMap:
    scores: np.ndarray       # [N_source, N_target]
    source_grid: int
    target_grid: int
    model_id: str = ""
    pair_id: str = ""

    def __post_init__(self):
        if not np.isfinite(self.scores).all():
            raise ContractError("correspondence map contains non-finite scores")


def aggregate_logits(logits: np.ndarray, head_mode: str = "mean") -> np.ndarray:
    """[blocks, heads, Nq, Nk] -> [Nq, Nk]: head mean (or concatenated-head
    equivalent, a sqrt(heads) rescale of the mean) then block mean."""
    if head_mode == "mean":
        per_block = logits.mean(axis=1)
    elif head_mode == "concat":
        # dot product of concatenated heads = sum_h q_h.k_h; with 1/sqrt(d)
        # scaling this is sqrt(heads) times the per-head mean
        per_block = logits.mean(axis=1) * np.sqrt(logits.shape[1])
    else:
        raise ContractError(f"unknown head_mode {head_mode!r}")
    return per_block.mean(axis=0)


def extract_map(model: LoadedModel, x_s: np.ndarray, x_t: np.ndarray,
                head_mode: str = "mean", row_softmax: bool = False,
                pair_id: str = "") -> CorrespondenceMap:
    """Aggregated decoder cross-attention for one (source, target) image pair."""
    arch = model.arch
    if x_s.shape[:2] != (arch.image_size, arch.image_size) or x_s.shape != x_t.shape:
        raise ContractError(f"images {x_s.shape}/{x_t.shape} do not match the model's "
                            f"{arch.image_size}px input")
    pt = as_tensors(model.params, trainable=False)
    ps = patchify(x_s.astype(np.float32), arch.patch_size)
    pt_img = patchify(x_t.astype(np.float32), arch.patch_size)
    z_s = encode(pt, arch, ps, None)
    plan = full_visible_plan(arch.n_patches)
    z_t = encode(pt, arch, pt_img, plan.visible_idx)
    _, logits = decode(pt, arch, z_s, z_t, plan, capture_logits=True)
    agg = aggregate_logits(np.asarray(logits, dtype=np.float64), head_mode)
    scores = agg.T  # rows: source patches
    if row_softmax:
        z = scores - scores.max(axis=1, keepdims=True)
        e = np.exp(z)
        scores = e / e.sum(axis=1, keepdims=True)
    return CorrespondenceMap(scores=scores, source_grid=arch.grid,
                             target_grid=arch.grid, model_id=model.model_id,
                             pair_id=pair_id)
