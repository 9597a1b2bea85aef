"""Siamese cross-view-completion forward pass.

A weight-shared patch encoder embeds the full source image and the visible
target patches; a decoder reconstructs every target patch from mask tokens
that cross-attend to the source features. The loss is the mean squared error
over masked target patches only. Cross-attention logits can be captured per
block and head for the alignment analysis.

Decoder queries follow full patch order (visible features in place, mask
tokens at masked slots), so captured logit rows index target patches directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numcore as nc
from ..errors import ConfigError, ContractError, DimensionError
from ..seeding import rng_for
from .config import ArchConfig


@dataclass(frozen=True)
class MaskPlan:
    visible_idx: np.ndarray  # sorted
    masked_idx: np.ndarray   # sorted complement

    @property
    def n_masked(self) -> int:
        return len(self.masked_idx)


def round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def sample_mask(n_patches: int, ratio: float, seed: int) -> MaskPlan:
    """Uniform random mask over patch indices; round-half-up patch count."""
    if not (0.0 <= ratio < 1.0):
        raise ContractError(f"masking ratio must be in [0, 1), got {ratio}")
    n_masked = round_half_up(ratio * n_patches)
    if n_masked >= n_patches:
        raise ContractError("mask would cover every patch; at least one must stay visible")
    perm = rng_for(seed, "mask").permutation(n_patches)
    masked = np.sort(perm[:n_masked])
    visible = np.sort(perm[n_masked:])
    return MaskPlan(visible_idx=visible, masked_idx=masked)


def full_visible_plan(n_patches: int) -> MaskPlan:
    return MaskPlan(visible_idx=np.arange(n_patches), masked_idx=np.arange(0))


def patchify(image: np.ndarray, patch_size: int) -> np.ndarray:
    """[H, W, 3] -> [N, ps*ps*3] (or batched) in row-major patch order."""
    if image.shape[-3] != image.shape[-2] or image.shape[-3] % patch_size != 0:
        raise ConfigError(f"image shape {image.shape} incompatible with patch {patch_size}")
    *lead, h, w, c = image.shape
    g = h // patch_size
    x = image.reshape(*lead, g, patch_size, g, patch_size, c)
    x = np.moveaxis(x, -3, -4)  # [..., g, g, ps, ps, c]
    return np.ascontiguousarray(x).reshape(*lead, g * g, patch_size * patch_size * c)


def unpatchify(patches: np.ndarray, patch_size: int) -> np.ndarray:
    """Exact inverse of `patchify`."""
    *lead, n, pd = patches.shape
    g = int(round(np.sqrt(n)))
    c = pd // (patch_size * patch_size)
    x = patches.reshape(*lead, g, g, patch_size, patch_size, c)
    x = np.moveaxis(x, -4, -3)
    return np.ascontiguousarray(x).reshape(*lead, g * patch_size, g * patch_size, c)


def _mha_params(pt: dict, prefix: str) -> dict:
    return {n: pt[f"{prefix}.{n}"] for n in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")}


def _ln(pt, prefix, x):
    return nc.layer_norm(x, pt[f"{prefix}.g"], pt[f"{prefix}.b"])


def _mlp(pt, prefix, x):
    return nc.mlp_gelu(x, pt[f"{prefix}.w1"], pt[f"{prefix}.b1"],
                       pt[f"{prefix}.w2"], pt[f"{prefix}.b2"])


def as_tensors(params: dict[str, np.ndarray], trainable=True,
               frozen=("pos_embed",), dtype=None) -> dict[str, nc.Tensor]:
    """Wrap a parameter dict as graph leaves (frozen entries stay constant)."""
    return {k: nc.Tensor(v, requires_grad=trainable and k not in frozen, name=k, dtype=dtype)
            for k, v in params.items()}


def encode(pt: dict, arch: ArchConfig, patches: np.ndarray, idx=None) -> nc.Tensor:
    """Embed and self-attend a subset of patches (positional code by original index).

    `patches` is [N, pd] or [B, N, pd]; `idx` selects rows ([S] or [B, S]),
    None meaning all. The same parameters serve source and target (Siamese).
    """
    dtype = pt["patch_embed.w"].dtype
    pos = np.asarray(pt["pos_embed"].data, dtype=dtype)
    patches = np.asarray(patches, dtype=dtype)
    if idx is None:
        sel, pos_sel = patches, pos
    else:
        idx = np.asarray(idx)
        if idx.size == 0:
            raise ContractError("encode needs a non-empty patch subset")
        if idx.ndim == 1:
            sel, pos_sel = patches[..., idx, :], pos[idx]
        else:
            sel = np.take_along_axis(patches, idx[:, :, None], axis=1)
            pos_sel = pos[idx]
    x = nc.affine(nc.constant(sel), pt["patch_embed.w"], pt["patch_embed.b"])
    x = nc.add(x, nc.constant(pos_sel))
    for i in range(arch.enc_blocks):
        p = f"enc.{i}"
        h = _ln(pt, f"{p}.ln1", x)
        attn_out, _ = nc.multi_head_attention(h, h, _mha_params(pt, f"{p}.attn"),
                                              arch.enc_heads)
        x = nc.add(x, attn_out)
        x = nc.add(x, _mlp(pt, f"{p}.mlp", _ln(pt, f"{p}.ln2", x)))
    return _ln(pt, "enc_norm", x)


def decode(pt: dict, arch: ArchConfig, z_s: nc.Tensor, z_t_visible: nc.Tensor,
           plan, capture_logits=False):
    """Reconstruct all target patches from source features.

    `plan` is a MaskPlan (single) or a pair of index arrays
    (visible_idx [B, S], masked_idx [B, M]) for a batch. Returns
    (predictions [.., N, pd], logits [dec_blocks, heads, Nt, Ns] or batched)
    with logits pre-softmax, present only when `capture_logits` is set.
    """
    if z_s.shape[-1] != arch.dec_dim:
        raise ConfigError(f"source feature dim {z_s.shape[-1]} != decoder dim {arch.dec_dim}")
    n = arch.n_patches
    batched = z_s.ndim == 3
    visible_idx = plan.visible_idx if isinstance(plan, MaskPlan) else plan[0]
    dtype = pt["mask_token"].dtype
    pos = np.asarray(pt["pos_embed"].data, dtype=dtype)

    base = nc.add(nc.constant(pos), pt["mask_token"])  # [N, d]
    if batched:
        b = z_s.shape[0]
        base = nc.add(base, nc.constant(np.zeros((b, n, arch.dec_dim), dtype=dtype)))
    x = nc.scatter_rows(base, visible_idx, z_t_visible)

    logits_all = []
    for i in range(arch.dec_blocks):
        p = f"dec.{i}"
        h = _ln(pt, f"{p}.ln1", x)
        self_out, _ = nc.multi_head_attention(h, h, _mha_params(pt, f"{p}.attn"),
                                              arch.dec_heads)
        x = nc.add(x, self_out)
        hq = _ln(pt, f"{p}.ln2", x)
        cross_out, logits = nc.multi_head_attention(hq, z_s, _mha_params(pt, f"{p}.cross"),
                                                    arch.dec_heads,
                                                    return_logits=capture_logits)
        x = nc.add(x, cross_out)
        x = nc.add(x, _mlp(pt, f"{p}.mlp", _ln(pt, f"{p}.ln3", x)))
        if capture_logits:
            logits_all.append(logits)
    x = _ln(pt, "dec_norm", x)
    pred = nc.affine(x, pt["pred_head.w"], pt["pred_head.b"])
    if not capture_logits:
        return pred, None
    stacked = np.stack([lg.data for lg in logits_all], axis=-4)  # [..., blocks, h, Nt, Ns]
    return pred, stacked


def croco_loss(pred: nc.Tensor, target_patches: np.ndarray, plan) -> nc.Tensor:
    """Mean squared error over masked target patches and pixel channels."""
    masked_idx = plan.masked_idx if isinstance(plan, MaskPlan) else plan[1]
    masked_idx = np.asarray(masked_idx)
    if masked_idx.size == 0:
        raise ContractError("croco_loss needs at least one masked patch")
    target = np.asarray(target_patches)
    if tuple(pred.shape) != target.shape:
        raise DimensionError(f"prediction {tuple(pred.shape)} vs target {target.shape}")
    target = target.astype(pred.dtype, copy=False)
    if masked_idx.ndim == 1:
        tgt_sel = target[..., masked_idx, :]
    else:
        tgt_sel = np.take_along_axis(target, masked_idx[:, :, None], axis=1)
    pred_sel = nc.gather_rows(pred, masked_idx)
    return nc.mse(pred_sel, nc.constant(tgt_sel))


def normalize_patch_targets(patches: np.ndarray, eps=1e-6) -> np.ndarray:
    """Optional per-patch (mean, std) normalization of reconstruction targets."""
    mu = patches.mean(axis=-1, keepdims=True)
    sd = patches.std(axis=-1, keepdims=True)
    return (patches - mu) / (sd + eps)


def forward_pair_loss(pt: dict, arch: ArchConfig, src_patches: np.ndarray,
                      tgt_patches: np.ndarray, plan) -> nc.Tensor:
    """Full training fragment: encode both sides, decode, masked MSE."""
    visible_idx = plan.visible_idx if isinstance(plan, MaskPlan) else plan[0]
    z_s = encode(pt, arch, src_patches, None)
    z_t = encode(pt, arch, tgt_patches, visible_idx)
    pred, _ = decode(pt, arch, z_s, z_t, plan)
    target = normalize_patch_targets(tgt_patches) if arch.norm_pix else tgt_patches
    return croco_loss(pred, target, plan)
