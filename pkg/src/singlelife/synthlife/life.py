"""Rendering a full "life": frames with ground-truth pose, depth, flow and
per-frame visible point sets.

Rendering is analytic: each pixel ray is intersected with every planar patch
and the nearest hit wins (exact per-pixel occlusion), the hit's albedo is the
pixel color, and the hit geometry directly yields depth, optical flow to the
next frame, and point visibility. No lighting model.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .geometry import (NEAR_PLANE, CameraState, Intrinsics, pixel_dirs_world,
                       pose_from_yaw_pitch, project_points, visible_point_ids)
from .trajectory import TrajectorySpec, synthesize_trajectory
from .world import World, albedo

BACKGROUND = np.array([0.55, 0.67, 0.80])  # unlit sky
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass
class FrameRecord:
    frame_id: int
    timestamp: float
    image: np.ndarray                 # [H, W, 3] float32 in [0, 1]
    pose: CameraState | None
    depth: np.ndarray | None          # [H, W] float32, 0 where undefined
    flow_to_next: np.ndarray | None   # [H, W, 2] float32 (dx, dy) px; None on last frame
    visible_points: np.ndarray | None  # sorted int64 ids


@dataclass
class LifeDataset:
    life_id: str
    frames: list
    fps: float
    channels: dict = field(default_factory=lambda: {"pose": True, "depth": True,
                                                    "flow": True, "visibility": True})
    warnings: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.frames)

    def __post_init__(self):
        ts = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ContractError("frame timestamps must be strictly increasing")
        if [f.frame_id for f in self.frames] != list(range(len(self.frames))):
            raise ContractError("frame ids must be dense from 0")


def render_frame(world: World, pose: CameraState):
    """(image [H,W,3], depth [H,W], hit landmark idx, world dirs) for one pose."""
    k = pose.intrinsics
    dirs = pixel_dirs_world(pose)  # [H, W, 3]
    shape = (k.height, k.width)
    best_t = np.full(shape, np.inf)
    best_i = np.full(shape, -1, dtype=np.int32)
    image = np.tile(BACKGROUND, (*shape, 1))
    for i, lm in enumerate(world.landmarks):
        n = lm.normal
        denom = dirs @ n
        offset = float((lm.center - pose.position) @ n)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = offset / denom
        hit_ok = np.isfinite(t) & (t > NEAR_PLANE) & (t < best_t)
        if not hit_ok.any():
            continue
        rel = pose.position + t[..., None] * dirs - lm.center
        a = (rel @ lm.u_hat) / lm.hu
        b = (rel @ lm.v_hat) / lm.hv
        hit_ok &= (np.abs(a) <= 1.0) & (np.abs(b) <= 1.0)
        if not hit_ok.any():
            continue
        image[hit_ok] = albedo(lm, a[hit_ok], b[hit_ok])
        best_t[hit_ok] = t[hit_ok]
        best_i[hit_ok] = i
    depth = np.where(np.isfinite(best_t), best_t, 0.0)
    return image.astype(np.float32), depth.astype(np.float32), best_i, dirs


def flow_between(pose_a: CameraState, depth_a: np.ndarray, dirs_a: np.ndarray,
                 pose_b: CameraState):
    """Analytic optical flow a->b from a's depth buffer; (flow [H,W,2], z_b [H,W])."""
    k = pose_a.intrinsics
    h, w = depth_a.shape
    valid = depth_a > 0
    flow = np.zeros((h, w, 2), dtype=np.float32)
    zb = np.zeros((h, w))
    if (pose_a.position == pose_b.position).all() and (pose_a.quat == pose_b.quat).all():
        # identical poses reproject every point onto itself
        zb[valid] = depth_a[valid]
        return flow, zb
    if valid.any():
        pts = pose_a.position + depth_a[valid, None] * dirs_a[valid]
        u2, v2, z2 = project_points(pose_b, pts)
        uu, vv = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
        ok = z2 > NEAR_PLANE
        fx = np.where(ok, u2 - uu[valid], 0.0)
        fy = np.where(ok, v2 - vv[valid], 0.0)
        flow[valid] = np.stack([fx, fy], axis=-1).astype(np.float32)
        zb[valid] = np.where(ok, z2, 0.0)
    return flow, zb


def generate_life(world: World, traj: TrajectorySpec, duration_s: float, fps: float,
                  image_size: int = 64, seed: int | None = None,
                  focal: float | None = None, life_id: str | None = None) -> LifeDataset:
    """Render a deterministic life: `duration_s * fps` frames (at least 2)."""
    n_frames = int(round(duration_s * fps))
    if n_frames < 2:
        raise ContractError(f"life needs at least 2 frames, got {n_frames}")
    seed = world.seed if seed is None else int(seed)
    intr = Intrinsics.centered(image_size, focal)
    pos, yaw, pitch, warnings = synthesize_trajectory(traj, world.bounds, n_frames,
                                                      fps, seed)
    poses = [pose_from_yaw_pitch(pos[i], yaw[i], pitch[i], intr) for i in range(n_frames)]

    frames: list[FrameRecord] = []
    prev = None  # (image, depth, dirs, pose)
    for i, pose in enumerate(poses):
        image, depth, _, dirs = render_frame(world, pose)
        vis = visible_point_ids(pose, world.points, world.point_ids, world.landmarks)
        if prev is not None:
            p_img, p_depth, p_dirs, p_pose, p_vis = prev
            flow, _ = flow_between(p_pose, p_depth, p_dirs, pose)
            frames.append(FrameRecord(frame_id=i - 1, timestamp=(i - 1) / fps,
                                      image=p_img, pose=p_pose, depth=p_depth,
                                      flow_to_next=flow, visible_points=p_vis))
        prev = (image, depth, dirs, pose, vis)
    p_img, p_depth, _, p_pose, p_vis = prev
    frames.append(FrameRecord(frame_id=n_frames - 1, timestamp=(n_frames - 1) / fps,
                              image=p_img, pose=p_pose, depth=p_depth,
                              flow_to_next=None, visible_points=p_vis))
    lid = life_id or f"life-w{world.seed}-{traj.kind}-s{seed}"
    return LifeDataset(life_id=lid, frames=frames, fps=float(fps), warnings=warnings,
                       meta={"world_seed": world.seed, "trajectory": traj.kind,
                            "seed": seed, "duration_s": duration_s})


def pairwise_flow(life: LifeDataset, i: int, j: int, rel_tol: float = 0.02):
    """Ground-truth flow from frame i to frame j plus a co-visibility mask.

    Uses only stored channels (pose + depth), so it works on ingested data too.
    Pixels count as co-visible when their world point lands inside frame j with
    depth agreeing with j's depth buffer within `rel_tol` (relative).
    """
    fa, fb = life.frames[i], life.frames[j]
    if fa.pose is None or fb.pose is None:
        raise ContractError("pairwise_flow needs the pose channel")
    if fa.depth is None or fb.depth is None:
        raise ContractError("pairwise_flow needs the depth channel")
    dirs = pixel_dirs_world(fa.pose)
    flow, zb = flow_between(fa.pose, fa.depth, dirs, fb.pose)
    k = fa.pose.intrinsics
    uu, vv = np.meshgrid(np.arange(k.width) + 0.5, np.arange(k.height) + 0.5)
    u2, v2 = uu + flow[..., 0], vv + flow[..., 1]
    inside = (u2 >= 0) & (u2 < k.width) & (v2 >= 0) & (v2 < k.height)
    valid = (fa.depth > 0) & (zb > 0) & inside
    iu = np.clip(u2.astype(np.int64), 0, k.width - 1)
    iv = np.clip(v2.astype(np.int64), 0, k.height - 1)
    z_buf = fb.depth[iv, iu]
    agree = np.abs(z_buf - zb) <= np.maximum(rel_tol * zb, rel_tol)
    return flow, (valid & agree)


def life_brightness_stats(life: LifeDataset, n_samples: int):
    """Mean grayscale intensity (luma weights) per sampled frame + summary."""
    if len(life.frames) == 0:
        raise ContractError("cannot compute brightness of an empty life")
    if n_samples < 1 or n_samples > len(life.frames):
        raise ContractError(f"n_samples must be in [1, {len(life.frames)}]")
    idx = np.unique(np.linspace(0, len(life.frames) - 1, n_samples).round().astype(int))
    per_frame = [(int(i), float((life.frames[i].image @ LUMA).mean())) for i in idx]
    vals = np.array([v for _, v in per_frame])
    summary = {"mean": float(vals.mean()), "std": float(vals.std()),
               "q25": float(np.quantile(vals, 0.25)), "q50": float(np.quantile(vals, 0.50)),
               "q75": float(np.quantile(vals, 0.75)), "n": len(per_frame)}
    return per_frame, summary
