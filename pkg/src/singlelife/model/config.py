"""Architecture configuration for the cross-view-completion network."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class ArchConfig:
    image_size: int = 64
    patch_size: int = 8
    enc_blocks: int = 4
    enc_dim: int = 128
    enc_heads: int = 4
    dec_blocks: int = 4
    dec_dim: int = 128
    dec_heads: int = 4
    masking_ratio: float = 0.95
    mlp_ratio: float = 2.0  # leaner than the conventional 4x; right-sized for desk runs
    norm_pix: bool = False  # per-patch target normalization, off by default

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ConfigError(f"image_size {self.image_size} not divisible by "
                              f"patch_size {self.patch_size}")
        if self.enc_dim % self.enc_heads != 0 or self.dec_dim % self.dec_heads != 0:
            raise ConfigError("model dims must be divisible by head counts")
        if self.enc_dim != self.dec_dim:
            raise ConfigError("encoder and decoder dims must match (no projection layer)")
        if self.enc_dim % 4 != 0:
            raise ConfigError("enc_dim must be divisible by 4 for 2-D sin-cos embeddings")
        if not (0.0 <= self.masking_ratio < 1.0):
            raise ConfigError(f"masking_ratio must be in [0, 1), got {self.masking_ratio}")

    @property
    def grid(self) -> int:
        return self.image_size // self.patch_size

    @property
    def n_patches(self) -> int:
        return self.grid * self.grid

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size * 3

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ArchConfig":
        return cls(**d)


def desk_config(**overrides) -> ArchConfig:
    """Desktop-scale default: 64 px images, 8 px patches (N=64), 4x128x4 blocks."""
    return ArchConfig(**overrides)


def reference_scale_config() -> ArchConfig:
    """Reference-scale preset (ViT-Base/16 encoder at 256 px, 12x768x12 decoder).

    Kept for documentation and config round-trips; far too large to train here.
    """
    return ArchConfig(image_size=256, patch_size=16,
                      enc_blocks=12, enc_dim=768, enc_heads=12,
                      dec_blocks=12, dec_dim=768, dec_heads=12,
                      masking_ratio=0.95, mlp_ratio=4.0)
