"""Parameter initialization and bookkeeping.

Parameters live in a flat `dict[str, np.ndarray]` keyed by dotted names
(`enc.0.attn.wq`, `pred_head.b`, ...). Weight matrices start truncated-normal
(std 0.02, clipped at two sigmas by resampling), biases and norm offsets at
zero, norm gains at one. Positional embeddings are fixed 2-D sin-cos and are
the only frozen entry.
"""

from __future__ import annotations

import numpy as np

from ..seeding import rng_for
from .config import ArchConfig

FROZEN = ("pos_embed",)

_ATTN = ("wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo")


def trunc_normal(rng: np.random.Generator, shape, std=0.02) -> np.ndarray:
    out = rng.normal(0.0, std, size=shape)
    for _ in range(8):
        bad = np.abs(out) > 2.0 * std
        if not bad.any():
            break
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
    return np.clip(out, -2.0 * std, 2.0 * std).astype(np.float32)


def sincos_pos_embed_2d(dim: int, grid: int) -> np.ndarray:
    """Fixed 2-D sin-cos embedding, [grid*grid, dim], row-major patch order."""
    assert dim % 4 == 0
    half = dim // 2
    omega = 1.0 / 10000.0 ** (np.arange(half // 2, dtype=np.float64) / (half / 2.0))
    ys, xs = np.meshgrid(np.arange(grid, dtype=np.float64),
                         np.arange(grid, dtype=np.float64), indexing="ij")

    def embed(pos):
        ang = pos.reshape(-1, 1) * omega
        return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)

    return np.concatenate([embed(ys.ravel()), embed(xs.ravel())], axis=1).astype(np.float32)


def _add_block_shapes(shapes: dict, prefix: str, dim: int, hidden: int, cross: bool):
    def ln(tag):
        shapes[f"{prefix}.{tag}.g"] = (dim,)
        shapes[f"{prefix}.{tag}.b"] = (dim,)

    def attn(tag):
        for n in _ATTN:
            shapes[f"{prefix}.{tag}.{n}"] = (dim, dim) if n.startswith("w") else (dim,)

    ln("ln1")
    attn("attn")
    if cross:
        ln("ln2")
        attn("cross")
        ln("ln3")
    else:
        ln("ln2")
    shapes[f"{prefix}.mlp.w1"] = (dim, hidden)
    shapes[f"{prefix}.mlp.b1"] = (hidden,)
    shapes[f"{prefix}.mlp.w2"] = (hidden, dim)
    shapes[f"{prefix}.mlp.b2"] = (dim,)


def param_shapes(arch: ArchConfig) -> dict[str, tuple]:
    """Shape of every parameter; a pure function of the architecture."""
    d, dd = arch.enc_dim, arch.dec_dim
    hid_e, hid_d = int(d * arch.mlp_ratio), int(dd * arch.mlp_ratio)
    shapes: dict[str, tuple] = {
        "patch_embed.w": (arch.patch_dim, d),
        "patch_embed.b": (d,),
        "pos_embed": (arch.n_patches, d),
        "mask_token": (dd,),
        "pred_head.w": (dd, arch.patch_dim),
        "pred_head.b": (arch.patch_dim,),
        "enc_norm.g": (d,), "enc_norm.b": (d,),
        "dec_norm.g": (dd,), "dec_norm.b": (dd,),
    }
    for i in range(arch.enc_blocks):
        _add_block_shapes(shapes, f"enc.{i}", d, hid_e, cross=False)
    for i in range(arch.dec_blocks):
        _add_block_shapes(shapes, f"dec.{i}", dd, hid_d, cross=True)
    return shapes


def init_params(arch: ArchConfig, seed: int) -> dict[str, np.ndarray]:
    rng = rng_for(seed, "init")
    params: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(arch).items():
        leafname = name.split(".")[-1]
        if name == "pos_embed":
            params[name] = sincos_pos_embed_2d(arch.enc_dim, arch.grid)
        elif leafname in ("g",):
            params[name] = np.ones(shape, dtype=np.float32)
        elif leafname in ("b", "b1", "b2") or leafname.startswith("b"):
            params[name] = np.zeros(shape, dtype=np.float32)
        else:  # weights and mask_token
            params[name] = trunc_normal(rng, shape)
    return params


def param_count(arch: ArchConfig) -> int:
    return sum(int(np.prod(s)) for s in param_shapes(arch).values())


def trainable_names(params: dict[str, np.ndarray]) -> list[str]:
    return [k for k in params if k not in FROZEN]
