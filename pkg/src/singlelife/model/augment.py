"""2-D image augmentation: sub-pixel crop, bilinear resize, color jitter.

An `AugSpec` fully determines the transform, so augmented training pairs are
reproducible from their mined spec. Crop geometry is continuous: the window
side is `scale * size` and the offsets are fractions of the remaining slack,
which makes scale=1, offset=0 an exact identity.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import ContractError


@dataclass(frozen=True)
class AugSpec:
    scale: float = 1.0        # crop side as a fraction of the image side
    off_x: float = 0.0        # fraction of horizontal slack (1 - scale)
    off_y: float = 0.0
    gain: tuple = (1.0, 1.0, 1.0)   # per-channel multiplicative jitter
    bias: tuple = (0.0, 0.0, 0.0)   # per-channel additive jitter

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, s: str) -> "AugSpec":
        d = json.loads(s)
        d["gain"], d["bias"] = tuple(d["gain"]), tuple(d["bias"])
        return cls(**d)

    @classmethod
    def identity(cls) -> "AugSpec":
        return cls()


@dataclass(frozen=True)
class AugRanges:
    scale: tuple = (0.5, 1.0)
    gain: tuple = (0.8, 1.2)
    bias: tuple = (-0.1, 0.1)

    @classmethod
    def identity(cls) -> "AugRanges":
        return cls(scale=(1.0, 1.0), gain=(1.0, 1.0), bias=(0.0, 0.0))


def sample_aug(rng: np.random.Generator, ranges: AugRanges) -> AugSpec:
    scale = float(rng.uniform(*ranges.scale))
    return AugSpec(scale=scale,
                   off_x=float(rng.uniform(0.0, 1.0)),
                   off_y=float(rng.uniform(0.0, 1.0)),
                   gain=tuple(float(rng.uniform(*ranges.gain)) for _ in range(3)),
                   bias=tuple(float(rng.uniform(*ranges.bias)) for _ in range(3)))


def bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample `image` [H, W, C] at continuous (x, y), clamping at the border."""
    h, w = image.shape[:2]
    x = np.clip(xs, 0.0, w - 1.0)
    y = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None]
    fy = (y - y0)[..., None]
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def apply_aug(image: np.ndarray, spec: AugSpec) -> np.ndarray:
    """Crop -> bilinear resize back to the input size -> color jitter, clamped."""
    h, w = image.shape[:2]
    if not (0.0 < spec.scale <= 1.0) or not (0.0 <= spec.off_x <= 1.0) \
            or not (0.0 <= spec.off_y <= 1.0):
        raise ContractError(f"crop window outside the image: {spec}")
    win_w, win_h = spec.scale * w, spec.scale * h
    left = spec.off_x * (w - win_w)
    top = spec.off_y * (h - win_h)
    xs = left + (np.arange(w) + 0.5) * (win_w / w) - 0.5
    ys = top + (np.arange(h) + 0.5) * (win_h / h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    out = bilinear_sample(np.asarray(image, dtype=np.float64), gx, gy)
    out = out * np.asarray(spec.gain) + np.asarray(spec.bias)
    return np.clip(out, 0.0, 1.0).astype(np.float32)
