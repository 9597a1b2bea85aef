"""On-disk life layout (synthetic and ingested data share it).

    <life_dir>/
      manifest.jsonl      one object per frame: frame_id, timestamp, image path,
                          pose as 7 floats [qw qx qy qz tx ty tz] (or null),
                          intrinsics
      images/<id>.ppm     8-bit binary PPM (P6)
      depth/<id>.bin      SLDF raster (float32 LE, 16-byte header)
      flow/<id>.bin       SLFL raster, 2 channels; absent for the last frame
      visibility.jsonl    frame_id -> sorted point-id array

Raster header: 4-byte magic, uint32 height, uint32 width, uint32 reserved.
Channels can be withheld at load time to emulate pose-free datasets.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import ChannelError, ConfigError
from .geometry import CameraState, Intrinsics
from .life import FrameRecord, LifeDataset

DEPTH_MAGIC = b"SLDF"
FLOW_MAGIC = b"SLFL"


def write_ppm(path, image: np.ndarray) -> None:
    """`image` float in [0,1], [H, W, 3]; quantized to 8 bits."""
    h, w = image.shape[:2]
    data = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    with open(path, "wb") as f:
        f.write(b"P6\n%d %d\n255\n" % (w, h))
        f.write(data.tobytes())


def read_ppm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if not raw.startswith(b"P6"):
        raise ConfigError(f"{path} is not a binary PPM")
    parts = []
    pos = 2
    while len(parts) < 3:
        while pos < len(raw) and raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            while raw[pos:pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos:pos + 1].isspace():
            pos += 1
        parts.append(int(raw[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = parts
    data = np.frombuffer(raw, dtype=np.uint8, offset=pos, count=h * w * 3)
    return (data.reshape(h, w, 3).astype(np.float32) / maxval).astype(np.float32)


def write_raster(path, array: np.ndarray, magic: bytes) -> None:
    arr = np.ascontiguousarray(array, dtype="<f4")
    h, w = arr.shape[0], arr.shape[1]
    with open(path, "wb") as f:
        f.write(magic)
        f.write(struct.pack("<III", h, w, 0))
        f.write(arr.tobytes())


def read_raster(path, magic: bytes) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != magic:
        raise ConfigError(f"{path}: expected magic {magic!r}, got {raw[:4]!r}")
    h, w, _ = struct.unpack("<III", raw[4:16])
    data = np.frombuffer(raw, dtype="<f4", offset=16)
    if data.size == h * w:
        return data.reshape(h, w).copy()
    return data.reshape(h, w, -1).copy()


def export_life(life: LifeDataset, out_dir) -> Path:
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    if life.channels.get("depth"):
        (out / "depth").mkdir(exist_ok=True)
    if life.channels.get("flow"):
        (out / "flow").mkdir(exist_ok=True)
    manifest_lines = []
    vis_lines = []
    for fr in life.frames:
        name = f"{fr.frame_id:06d}"
        write_ppm(out / "images" / f"{name}.ppm", fr.image)
        rec = {"frame_id": fr.frame_id, "timestamp": fr.timestamp,
               "image": f"images/{name}.ppm"}
        if life.channels.get("pose") and fr.pose is not None:
            rec["pose"] = [float(x) for x in np.concatenate([fr.pose.quat,
                                                             fr.pose.position])]
            rec["intrinsics"] = fr.pose.intrinsics.to_dict()
        else:
            rec["pose"] = None
        manifest_lines.append(json.dumps(rec, sort_keys=True, separators=(",", ":")))
        if life.channels.get("depth") and fr.depth is not None:
            write_raster(out / "depth" / f"{name}.bin", fr.depth, DEPTH_MAGIC)
        if life.channels.get("flow") and fr.flow_to_next is not None:
            write_raster(out / "flow" / f"{name}.bin", fr.flow_to_next, FLOW_MAGIC)
        if life.channels.get("visibility") and fr.visible_points is not None:
            vis_lines.append(json.dumps(
                {"frame_id": fr.frame_id,
                 "points": [int(p) for p in fr.visible_points]},
                sort_keys=True, separators=(",", ":")))
    (out / "manifest.jsonl").write_text("\n".join(manifest_lines) + "\n")
    if vis_lines:
        (out / "visibility.jsonl").write_text("\n".join(vis_lines) + "\n")
    return out


def load_life(life_dir, withhold=(), frame_ids=None, life_id=None) -> LifeDataset:
    """Ingest a life directory; `withhold` drops channels even if present."""
    root = Path(life_dir)
    manifest = root / "manifest.jsonl"
    if not manifest.exists():
        raise ConfigError(f"no manifest.jsonl under {root}")
    records = [json.loads(line) for line in manifest.read_text().splitlines() if line]
    records.sort(key=lambda r: r["frame_id"])
    want = frame_ids if frame_ids is None else set(int(i) for i in frame_ids)

    vis_map = {}
    vis_path = root / "visibility.jsonl"
    if vis_path.exists() and "visibility" not in withhold:
        for line in vis_path.read_text().splitlines():
            if line:
                rec = json.loads(line)
                vis_map[rec["frame_id"]] = np.asarray(sorted(rec["points"]), dtype=np.int64)

    frames = []
    channels = {"pose": False, "depth": False, "flow": False,
                "visibility": bool(vis_map)}
    for rec in records:
        fid = rec["frame_id"]
        if want is not None and fid not in want:
            continue
        image = read_ppm(root / rec["image"])
        pose = None
        if rec.get("pose") is not None and "pose" not in withhold:
            q = np.asarray(rec["pose"][:4], dtype=np.float64)
            q = q / np.linalg.norm(q)
            pose = CameraState(position=np.asarray(rec["pose"][4:], dtype=np.float64),
                               quat=q, intrinsics=Intrinsics.from_dict(rec["intrinsics"]))
            channels["pose"] = True
        name = f"{fid:06d}"
        depth = flow = None
        dpath = root / "depth" / f"{name}.bin"
        if dpath.exists() and "depth" not in withhold:
            depth = read_raster(dpath, DEPTH_MAGIC)
            channels["depth"] = True
        fpath = root / "flow" / f"{name}.bin"
        if fpath.exists() and "flow" not in withhold:
            flow = read_raster(fpath, FLOW_MAGIC)
            channels["flow"] = True
        frames.append(FrameRecord(frame_id=fid, timestamp=rec["timestamp"], image=image,
                                  pose=pose, depth=depth, flow_to_next=flow,
                                  visible_points=vis_map.get(fid)))
    if want is not None:
        # re-densify ids so LifeDataset invariants hold for subsets
        for new_id, fr in enumerate(frames):
            fr.frame_id = new_id
    fps = 0.0
    if len(frames) >= 2 and want is None:
        fps = 1.0 / (frames[1].timestamp - frames[0].timestamp)
    return LifeDataset(life_id=life_id or root.name, frames=frames,
                       fps=round(fps, 9), channels=channels)


def read_frame_image(life_dir, frame_id: int) -> np.ndarray:
    """Fast single-image fetch used by the training loop."""
    return read_ppm(Path(life_dir) / "images" / f"{frame_id:06d}.ppm")


def manifest_frame_count(life_dir) -> int:
    manifest = Path(life_dir) / "manifest.jsonl"
    if not manifest.exists():
        raise ConfigError(f"no manifest.jsonl under {life_dir}")
    return sum(1 for line in manifest.read_text().splitlines() if line)


def require_channel(life: LifeDataset, name: str) -> None:
    if not life.channels.get(name):
        raise ChannelError(f"life {life.life_id!r} lacks the {name!r} channel")
