"""Cross-view-completion model: config, params, forward pass, augmentation, I/O."""

from .augment import AugRanges, AugSpec, apply_aug, bilinear_sample, sample_aug
from .config import ArchConfig, desk_config, reference_scale_config
from .io import (load_attention_dump, load_checkpoint, save_attention_dump,
                 save_checkpoint)
from .network import (MaskPlan, as_tensors, croco_loss, decode, encode,
                      forward_pair_loss, full_visible_plan, patchify, round_half_up,
                      sample_mask, unpatchify)
from .params import (FROZEN, init_params, param_count, param_shapes,
                     sincos_pos_embed_2d, trainable_names, trunc_normal)

__all__ = [
    "ArchConfig", "desk_config", "reference_scale_config",
    "AugRanges", "AugSpec", "apply_aug", "bilinear_sample", "sample_aug",
    "MaskPlan", "as_tensors", "croco_loss", "decode", "encode", "forward_pair_loss",
    "full_visible_plan", "patchify", "round_half_up", "sample_mask", "unpatchify",
    "FROZEN", "init_params", "param_count", "param_shapes", "sincos_pos_embed_2d",
    "trainable_names", "trunc_normal",
    "load_checkpoint", "save_checkpoint", "load_attention_dump", "save_attention_dump",
]
