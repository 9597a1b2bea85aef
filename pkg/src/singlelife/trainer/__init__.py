"""Per-life optimization: AdamW, cosine schedule, batched training loop."""

from .loop import TrainResult, train, windowed_means
from .optim import OptState, TrainConfig, adamw_step, decay_applies, lr_at

__all__ = ["TrainResult", "train", "windowed_means", "OptState", "TrainConfig",
           "adamw_step", "decay_applies", "lr_at"]
