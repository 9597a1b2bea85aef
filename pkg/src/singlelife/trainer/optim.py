"""AdamW with decoupled weight decay and a warmup+cosine learning-rate schedule.

Defaults follow masked-autoencoder conventions: betas (0.9, 0.95), weight
decay 0.05, eps 1e-8, base LR 1.5e-4, linear warm-up over the first 10% of
steps. Decay is skipped for 1-D parameters (biases, norm gains/offsets, the
mask token).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, NumericError
from ..model.augment import AugRanges


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int = 2000
    batch_size: int = 16
    base_lr: float = 1.5e-4
    warmup_frac: float = 0.10
    weight_decay: float = 0.05
    betas: tuple = (0.9, 0.95)
    eps: float = 1e-8
    seed: int = 0
    checkpoint_every: int = 0   # 0: only initial and final checkpoints
    precision: int = 32
    train_aug: bool = True
    aug_ranges: AugRanges = field(default_factory=lambda: AugRanges(
        scale=(0.8, 1.0), gain=(0.9, 1.1), bias=(-0.05, 0.05)))
    pipeline: bool = False      # overlap batch assembly with the optimizer step

    def __post_init__(self):
        if not (0.0 <= self.warmup_frac < 1.0):
            raise ContractError(f"warmup_frac must be in [0, 1), got {self.warmup_frac}")
        if self.batch_size < 1:
            raise ContractError("batch_size must be >= 1")
        if self.precision not in (32, 64):
            raise ContractError("precision must be 32 or 64")


@dataclass
class OptState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0

    @classmethod
    def for_params(cls, params: dict) -> "OptState":
        return cls(m={k: np.zeros_like(p) for k, p in params.items()},
                   v={k: np.zeros_like(p) for k, p in params.items()}, step=0)


def lr_at(step: int, cfg: TrainConfig) -> float:
    """Linear ramp 0 -> base over warmup steps, then cosine decay to 0."""
    if not (0 <= step <= cfg.total_steps):
        raise ContractError(f"step {step} outside [0, {cfg.total_steps}]")
    warm = int(round(cfg.warmup_frac * cfg.total_steps))
    if warm > 0 and step < warm:
        return cfg.base_lr * step / warm
    span = cfg.total_steps - warm
    progress = (step - warm) / span if span > 0 else 1.0
    return cfg.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


def decay_applies(name: str, param: np.ndarray) -> bool:
    return param.ndim >= 2


def adamw_step(params: dict, grads: dict, opt: OptState, lr: float,
               cfg: TrainConfig) -> tuple[dict, OptState]:
    """One decoupled-weight-decay update with bias correction (functional)."""
    b1, b2 = cfg.betas
    t = opt.step + 1
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ContractError(f"gradient shape {g.shape} != param shape {p.shape} "
                                f"for {name!r}")
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient for {name!r}; step aborted "
                               f"(|bad|={int(np.count_nonzero(~np.isfinite(g)))})")
        m = b1 * opt.m[name] + (1.0 - b1) * g
        v = b2 * opt.v[name] + (1.0 - b2) * (g * g)
        update = (m / c1) / (np.sqrt(v / c2) + cfg.eps)
        update *= lr
        if cfg.weight_decay and decay_applies(name, p):
            out = p * np.asarray(1.0 - lr * cfg.weight_decay, dtype=p.dtype)
        else:
            out = p.copy()
        out -= update.astype(p.dtype, copy=False)
        new_params[name] = out
        new_m[name], new_v[name] = m, v
    return new_params, OptState(m=new_m, v=new_v, step=t)
