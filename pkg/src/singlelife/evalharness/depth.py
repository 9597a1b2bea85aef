"""Monocular depth probing on top of a trained encoder.

The readout is a single attention block with a two-layer head that maps patch
features to a positive per-patch depth (softplus), bilinearly upsampled to
pixels and trained with an L1 loss on valid pixels. In `frozen` mode the
encoder is untouched (features are precomputed once); `finetune` mode trains
the encoder end-to-end together with the probe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import numcore as nc
from ..alignment.extract import LoadedModel
from ..errors import ContractError
from ..model import as_tensors, encode, patchify, trunc_normal
from ..seeding import rng_for
from ..trainer.optim import OptState, TrainConfig, adamw_step, lr_at


@dataclass(frozen=True)
class ProbeConfig:
    hidden: int = 128
    heads: int = 4
    mlp_ratio: float = 2.0
    steps: int = 2000
    batch_size: int = 16
    base_lr: float = 3e-4
    warmup_frac: float = 0.10
    weight_decay: float = 0.05
    seed: int = 0
    depth_scale: float = 4.0  # softplus output is multiplied by this many meters


@dataclass
class DepthEvalReport:
    delta1: float
    absrel: float
    n_pixels: int

    def __post_init__(self):
        if not (0.0 <= self.delta1 <= 1.0) or self.absrel < 0:
            raise ContractError("invalid depth report values")

    def to_dict(self):
        return {"delta1": self.delta1, "absrel": self.absrel, "n_pixels": self.n_pixels}


def delta1(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray) -> float:
    """Fraction of masked pixels with max(pred/gt, gt/pred) < 1.25."""
    pred, gt, mask = np.asarray(pred), np.asarray(gt), np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ContractError("empty evaluation mask")
    p, g = pred[mask], gt[mask]
    if (p <= 0).any() or (g <= 0).any():
        raise ContractError("depths must be positive inside the mask")
    ratio = np.maximum(p / g, g / p)
    return float((ratio < 1.25).mean())


def absrel(pred: np.ndarray, gt: np.ndarray, mask: np.ndarray, eps: float = 1e-8) -> float:
    """Mean |pred - gt| / (gt + eps) over masked pixels."""
    pred, gt, mask = np.asarray(pred), np.asarray(gt), np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ContractError("empty evaluation mask")
    p, g = pred[mask], gt[mask]
    if (p <= 0).any() or (g <= 0).any():
        raise ContractError("depths must be positive inside the mask")
    return float((np.abs(p - g) / (g + eps)).mean())


def bilinear_upsample_matrix(grid: int, patch_size: int) -> np.ndarray:
    """[N_patches, H*W] interpolation weights from patch centers to pixels."""
    size = grid * patch_size
    centers = (np.arange(grid) + 0.5) * patch_size
    px = np.arange(size) + 0.5
    pos = np.clip((px - centers[0]) / patch_size, 0.0, grid - 1.0)
    i0 = np.clip(np.floor(pos).astype(int), 0, grid - 2) if grid > 1 else np.zeros(size, int)
    frac = pos - i0 if grid > 1 else np.zeros(size)
    w_axis = np.zeros((grid, size))
    w_axis[i0, np.arange(size)] = 1.0 - frac
    if grid > 1:
        w_axis[i0 + 1, np.arange(size)] += frac
    # separable: weight[(r,c) -> (y,x)] = w_axis[r,y] * w_axis[c,x]
    w = np.einsum("ry,cx->rcyx", w_axis, w_axis).reshape(grid * grid, size * size)
    return w.astype(np.float32)


def init_probe(enc_dim: int, cfg: ProbeConfig) -> dict:
    rng = rng_for(cfg.seed, "probe_init")
    h = cfg.hidden
    mlp_h = int(h * cfg.mlp_ratio)
    params = {
        "proj.w": trunc_normal(rng, (enc_dim, h)), "proj.b": np.zeros(h, np.float32),
        "ln1.g": np.ones(h, np.float32), "ln1.b": np.zeros(h, np.float32),
        "ln2.g": np.ones(h, np.float32), "ln2.b": np.zeros(h, np.float32),
        "norm.g": np.ones(h, np.float32), "norm.b": np.zeros(h, np.float32),
        "mlp.w1": trunc_normal(rng, (h, mlp_h)), "mlp.b1": np.zeros(mlp_h, np.float32),
        "mlp.w2": trunc_normal(rng, (mlp_h, h)), "mlp.b2": np.zeros(h, np.float32),
        "head1.w": trunc_normal(rng, (h, h)), "head1.b": np.zeros(h, np.float32),
        "head2.w": trunc_normal(rng, (h, 1)), "head2.b": np.zeros(1, np.float32),
    }
    for n in ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo"):
        shape = (h, h) if n.startswith("w") else (h,)
        params[f"attn.{n}"] = trunc_normal(rng, shape) if n.startswith("w") \
            else np.zeros(shape, np.float32)
    return params


def probe_forward(pt: dict, cfg: ProbeConfig, feats) -> nc.Tensor:
    """Patch features [B, N, enc_dim] -> positive per-patch depth [B, N, 1]."""
    x = feats if isinstance(feats, nc.Tensor) else nc.constant(feats)
    x = nc.affine(x, pt["proj.w"], pt["proj.b"])
    hn = nc.layer_norm(x, pt["ln1.g"], pt["ln1.b"])
    attn_p = {n: pt[f"attn.{n}"] for n in ("wq", "bq", "wk", "bk", "wv", "bv",
                                           "wo", "bo")}
    attn_out, _ = nc.multi_head_attention(hn, hn, attn_p, cfg.heads)
    x = nc.add(x, attn_out)
    x = nc.add(x, nc.mlp_gelu(nc.layer_norm(x, pt["ln2.g"], pt["ln2.b"]),
                              pt["mlp.w1"], pt["mlp.b1"], pt["mlp.w2"], pt["mlp.b2"]))
    x = nc.layer_norm(x, pt["norm.g"], pt["norm.b"])
    x = nc.gelu(nc.affine(x, pt["head1.w"], pt["head1.b"]))
    z = nc.affine(x, pt["head2.w"], pt["head2.b"])
    return nc.scale(nc.softplus(z), cfg.depth_scale)


def _pixel_depth(pt, cfg, feats, up_t):
    d_patch = probe_forward(pt, cfg, feats)           # [B, N, 1]
    b, n, _ = d_patch.shape
    return nc.matmul(nc.reshape(d_patch, (b, 1, n)), up_t)  # [B, 1, H*W]


def masked_l1(pred: nc.Tensor, target: np.ndarray, mask: np.ndarray) -> nc.Tensor:
    weight = mask.astype(pred.dtype) / max(float(mask.sum()), 1.0)
    diff = nc.absolute(nc.sub(pred, nc.constant(target.astype(pred.dtype))))
    return nc.sum_all(nc.mul(diff, nc.constant(weight)))


def encode_features(model: LoadedModel, images: np.ndarray, batch: int = 16) -> np.ndarray:
    """Frozen-encoder features for a stack of images, [n, N, enc_dim]."""
    pt = as_tensors(model.params, trainable=False)
    out = []
    for i in range(0, len(images), batch):
        chunk = np.stack([patchify(img.astype(np.float32), model.arch.patch_size)
                          for img in images[i:i + batch]])
        out.append(encode(pt, model.arch, chunk, None).data)
    return np.concatenate(out, axis=0)


def train_probe(model: LoadedModel, train_items, eval_items, cfg: ProbeConfig,
                mode: str = "frozen"):
    """Fit the depth readout; returns (probe_params, DepthEvalReport, model_out).

    `train_items`/`eval_items` are (image, gt_depth) tuples; gt <= 0 marks
    invalid pixels. `model_out` is the input model in frozen mode and carries
    the finetuned encoder weights in finetune mode.
    """
    if mode not in ("frozen", "finetune"):
        raise ContractError(f"unknown probe mode {mode!r}")
    if not train_items or not eval_items:
        raise ContractError("need non-empty train and eval item lists")
    arch = model.arch
    up = bilinear_upsample_matrix(arch.grid, arch.patch_size)  # [N, HW]
    probe = init_probe(arch.enc_dim, cfg)
    enc_params = {k: v.copy() for k, v in model.params.items()} \
        if mode == "finetune" else model.params

    train_images = [img for img, _ in train_items]
    train_depths = np.stack([d for _, d in train_items]).astype(np.float32)
    feats_all = None
    if mode == "frozen":
        feats_all = encode_features(model, train_images)

    opt_cfg = TrainConfig(total_steps=cfg.steps, batch_size=cfg.batch_size,
                          base_lr=cfg.base_lr, warmup_frac=cfg.warmup_frac,
                          weight_decay=cfg.weight_decay, seed=cfg.seed,
                          train_aug=False)
    trainable = dict(probe)
    if mode == "finetune":
        trainable.update({f"enc::{k}": v for k, v in enc_params.items()
                          if k != "pos_embed"})
    opt = OptState.for_params(trainable)
    rng = rng_for(cfg.seed, "probe_batch")
    up_t = nc.constant(up)

    for step in range(cfg.steps):
        picks = rng.integers(len(train_items), size=cfg.batch_size)
        gt = train_depths[picks].reshape(len(picks), 1, -1)
        mask = gt > 0
        probe_t = as_tensors(probe, trainable=True)
        if mode == "frozen":
            feats = nc.constant(feats_all[picks])
            leaves = dict(probe_t)
        else:
            enc_t = as_tensors(enc_params, trainable=True)
            chunk = np.stack([patchify(train_images[int(p)].astype(np.float32),
                                       arch.patch_size) for p in picks])
            feats = encode(enc_t, arch, chunk, None)
            leaves = dict(probe_t)
            leaves.update({f"enc::{k}": v for k, v in enc_t.items()
                           if k != "pos_embed"})
        pred = _pixel_depth(probe_t, cfg, feats, up_t)
        loss = masked_l1(pred, gt, mask)
        grads = nc.gradients(loss, leaves)
        values = {k: (probe[k] if not k.startswith("enc::")
                      else enc_params[k[5:]]) for k in leaves}
        updated, opt = adamw_step(values, grads, opt, lr_at(step, opt_cfg), opt_cfg)
        for k, v in updated.items():
            if k.startswith("enc::"):
                enc_params[k[5:]] = v
            else:
                probe[k] = v

    model_out = model if mode == "frozen" else \
        LoadedModel(model_id=model.model_id + "+ft", arch=arch, params=enc_params)
    report = evaluate_probe(model_out, probe, cfg, eval_items)
    return probe, report, model_out


def evaluate_probe(model: LoadedModel, probe: dict, cfg: ProbeConfig,
                   eval_items) -> DepthEvalReport:
    arch = model.arch
    up_t = nc.constant(bilinear_upsample_matrix(arch.grid, arch.patch_size))
    images = [img for img, _ in eval_items]
    feats = encode_features(model, images)
    probe_t = as_tensors(probe, trainable=False)
    pred = _pixel_depth(probe_t, cfg, nc.constant(feats), up_t).data
    size = arch.image_size
    preds = pred.reshape(len(eval_items), size, size)
    gts = np.stack([d for _, d in eval_items])
    mask = gts > 0
    return DepthEvalReport(delta1=delta1(preds, gts, mask),
                           absrel=absrel(preds, gts, mask),
                           n_pixels=int(mask.sum()))


def depth_items_from_life(life, frame_ids=None) -> list:
    """(image, depth) tuples from a life's frames."""
    ids = range(len(life.frames)) if frame_ids is None else frame_ids
    items = []
    for i in ids:
        fr = life.frames[i]
        if fr.depth is None:
            raise ContractError("life lacks the depth channel")
        items.append((fr.image, fr.depth))
    return items
