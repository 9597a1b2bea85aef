"""Binary formats: model checkpoints (SLCK1) and attention dumps (SLAT1).

Checkpoint layout:
    b"SLCK1" | uint32 LE header length | JSON header | float32 LE payload
The JSON header carries the architecture dict and a tensor directory mapping
name -> {shape, offset} with byte offsets into the payload.

Attention dump layout:
    b"SLAT1" | uint32 LE dec_blocks | uint32 heads | uint32 n_patches
    | float32 LE data [dec_blocks, heads, N, N]
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .config import ArchConfig

CKPT_MAGIC = b"SLCK1"
ATTN_MAGIC = b"SLAT1"


def save_checkpoint(path, arch: ArchConfig, params: dict[str, np.ndarray]) -> None:
    path = Path(path)
    names = sorted(params)
    directory = {}
    offset = 0
    blobs = []
    for name in names:
        arr = np.ascontiguousarray(params[name], dtype="<f4")
        directory[name] = {"shape": list(arr.shape), "offset": offset}
        offset += arr.nbytes
        blobs.append(arr.tobytes())
    header = json.dumps({"arch": arch.to_dict(), "tensors": directory},
                        sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CKPT_MAGIC)
        f.write(struct.pack("<I", len(header)))
        f.write(header)
        for blob in blobs:
            f.write(blob)


def load_checkpoint(path) -> tuple[ArchConfig, dict[str, np.ndarray]]:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:5] != CKPT_MAGIC:
        raise ConfigError(f"{path} is not a checkpoint (bad magic)")
    (hlen,) = struct.unpack("<I", raw[5:9])
    header = json.loads(raw[9:9 + hlen].decode("utf-8"))
    payload = raw[9 + hlen:]
    arch = ArchConfig.from_dict(header["arch"])
    params = {}
    for name, meta in header["tensors"].items():
        shape = tuple(meta["shape"])
        count = int(np.prod(shape)) if shape else 1
        off = meta["offset"]
        arr = np.frombuffer(payload, dtype="<f4", count=count, offset=off)
        params[name] = arr.reshape(shape).copy()
    return arch, params


def save_attention_dump(path, logits: np.ndarray) -> None:
    """`logits` is [dec_blocks, heads, N, N]."""
    arr = np.ascontiguousarray(logits, dtype="<f4")
    if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
        raise ConfigError(f"attention dump must be [blocks, heads, N, N], got {arr.shape}")
    with open(path, "wb") as f:
        f.write(ATTN_MAGIC)
        f.write(struct.pack("<III", arr.shape[0], arr.shape[1], arr.shape[2]))
        f.write(arr.tobytes())


def load_attention_dump(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:5] != ATTN_MAGIC:
        raise ConfigError(f"{path} is not an attention dump (bad magic)")
    blocks, heads, n = struct.unpack("<III", raw[5:17])
    arr = np.frombuffer(raw, dtype="<f4", offset=17, count=blocks * heads * n * n)
    return arr.reshape(blocks, heads, n, n).copy()
