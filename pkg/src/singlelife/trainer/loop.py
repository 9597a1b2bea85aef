"""Per-life training loop.

Each step samples a batch of pairs with replacement, augments both sides,
patchifies, masks the target, runs the batched forward/backward pass and one
AdamW update. Everything is driven by seeds derived from the config seed, so
a run is a pure function of (pair index, arch, config, data) when pipelining
is off.
"""

from __future__ import annotations

import csv
import queue
import threading
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import model as M
from .. import numcore as nc
from ..errors import ContractError, SingleLifeError
from ..pairing.pairs import AUGMENTED, PairIndex
from ..seeding import derive_seed, rng_for
from ..synthlife.io import read_frame_image
from .optim import OptState, TrainConfig, adamw_step, lr_at


@dataclass
class TrainResult:
    out_dir: Path
    checkpoints: list
    log_rows: list            # (step, lr, loss)
    final_params: dict
    arch: M.ArchConfig
    loss_log_path: Path | None = None
    meta: dict = field(default_factory=dict)


class _FrameCache:
    def __init__(self, data_root):
        self.root = Path(data_root)
        self.images: dict[int, np.ndarray] = {}

    def get(self, frame_id: int, pair) -> np.ndarray:
        img = self.images.get(frame_id)
        if img is None:
            try:
                img = read_frame_image(self.root, frame_id)
            except FileNotFoundError as exc:
                raise SingleLifeError(
                    f"missing image for frame {frame_id} (pair "
                    f"{pair.source_id}->{pair.target_id}) under {self.root}") from exc
            self.images[frame_id] = img
        return img


def _assemble_batch(pairs, cache, arch, cfg, step, rng_batch):
    """Sample, augment, patchify and mask one batch; pure given the seeds."""
    n = arch.n_patches
    picks = rng_batch.integers(len(pairs), size=cfg.batch_size)
    src, tgt, vis, msk = [], [], [], []
    for i, k in enumerate(picks):
        pair = pairs[int(k)]
        src_img = cache.get(pair.source_id, pair)
        if pair.strategy == AUGMENTED and pair.aug_spec is not None:
            tgt_img = M.apply_aug(src_img, pair.aug_spec)
        else:
            tgt_img = cache.get(pair.target_id, pair)
        if cfg.train_aug:
            rng_aug = rng_for(cfg.seed, "aug", step, i)
            src_img = M.apply_aug(src_img, M.sample_aug(rng_aug, cfg.aug_ranges))
            tgt_img = M.apply_aug(tgt_img, M.sample_aug(rng_aug, cfg.aug_ranges))
        plan = M.sample_mask(n, arch.masking_ratio, seed=derive_seed(cfg.seed, "mask",
                                                                     step, i))
        src.append(M.patchify(src_img, arch.patch_size))
        tgt.append(M.patchify(tgt_img, arch.patch_size))
        vis.append(plan.visible_idx)
        msk.append(plan.masked_idx)
    return (np.stack(src), np.stack(tgt), np.stack(vis), np.stack(msk))


def train(life_pairs: PairIndex, arch: M.ArchConfig, cfg: TrainConfig, data_root,
          out_dir, log_cb=None) -> TrainResult:
    """Optimize one model on one life's pairs; writes checkpoints + loss CSV."""
    if len(life_pairs) == 0:
        raise ContractError("cannot train on an empty pair index")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    dtype = np.float32 if cfg.precision == 32 else np.float64
    params = {k: v.astype(dtype) for k, v in M.init_params(arch, seed=cfg.seed).items()}
    opt = OptState.for_params({k: v for k, v in params.items() if k not in M.FROZEN})
    cache = _FrameCache(data_root)
    rng_batch = rng_for(cfg.seed, "batch")

    checkpoints = []

    def save(step):
        path = out / f"ckpt_{step}.slck"
        M.save_checkpoint(path, arch, params)
        checkpoints.append(path)

    save(0)
    log_rows = []

    def make_batch(step):
        return _assemble_batch(life_pairs.pairs, cache, arch, cfg, step, rng_batch)

    batch_source = _pipelined(make_batch, cfg.total_steps) if cfg.pipeline else \
        (make_batch(s) for s in range(cfg.total_steps))

    for step, batch in enumerate(batch_source):
        src, tgt, vis, msk = batch
        lr = lr_at(step, cfg)
        leaves = M.as_tensors(params, trainable=True, dtype=dtype)
        loss = M.forward_pair_loss(leaves, arch, src, tgt, (vis, msk))
        grads = nc.gradients(loss, {k: leaves[k] for k in opt.m})
        trainable = {k: params[k] for k in opt.m}
        updated, opt = adamw_step(trainable, grads, opt, lr, cfg)
        params.update(updated)
        loss_val = float(loss.data)
        log_rows.append((step, lr, loss_val))
        if log_cb is not None:
            log_cb(step, lr, loss_val)
        done = step + 1
        if cfg.checkpoint_every and done % cfg.checkpoint_every == 0 \
                and done != cfg.total_steps:
            save(done)
    if cfg.total_steps > 0:
        save(cfg.total_steps)

    log_path = out / "loss_log.csv"
    with open(log_path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["step", "lr", "loss"])
        for row in log_rows:
            writer.writerow([row[0], repr(row[1]), repr(row[2])])
    return TrainResult(out_dir=out, checkpoints=checkpoints, log_rows=log_rows,
                       final_params=params, arch=arch, loss_log_path=log_path,
                       meta={"pairs": len(life_pairs), "life_id": life_pairs.life_id})


def _pipelined(make_batch, total_steps, depth=1):
    """Assemble batches in a worker thread; yields in step order."""
    q: queue.Queue = queue.Queue(maxsize=depth)

    def worker():
        for s in range(total_steps):
            q.put(make_batch(s))
        q.put(None)

    threading.Thread(target=worker, daemon=True).start()
    while True:
        item = q.get()
        if item is None:
            return
        yield item


def windowed_means(losses, window: int = 50) -> list:
    """Non-overlapping window averages of a loss sequence (for smoke checks)."""
    return [float(np.mean(losses[i:i + window])) for i in range(0, len(losses), window)]
