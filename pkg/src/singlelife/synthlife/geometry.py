"""Camera and planar-patch geometry.

Conventions: world y is up; the camera looks along its +z axis with x right
and y down (matching image coordinates, v grows downward). Orientation is
stored as a unit quaternion (w, x, y, z) for the camera-to-world rotation.
Depth always means the camera-frame z coordinate, so a ray through pixel
(u, v) is parameterized as `pos + depth * dir` with dir carrying unit
camera-z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ContractError

NEAR_PLANE = 0.05


@dataclass(frozen=True)
class Intrinsics:
    focal: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.focal <= 0:
            raise ContractError(f"focal length must be positive, got {self.focal}")

    def to_dict(self) -> dict:
        return {"focal": self.focal, "cx": self.cx, "cy": self.cy,
                "width": self.width, "height": self.height}

    @classmethod
    def from_dict(cls, d) -> "Intrinsics":
        return cls(focal=d["focal"], cx=d["cx"], cy=d["cy"],
                   width=int(d["width"]), height=int(d["height"]))

    @classmethod
    def centered(cls, image_size: int, focal: float | None = None) -> "Intrinsics":
        f = float(focal if focal is not None else image_size)
        return cls(focal=f, cx=image_size / 2.0, cy=image_size / 2.0,
                   width=image_size, height=image_size)


@dataclass(frozen=True)
class CameraState:
    position: np.ndarray      # (3,)
    quat: np.ndarray          # (4,) unit, (w, x, y, z), camera-to-world
    intrinsics: Intrinsics

    def __post_init__(self):
        q = np.asarray(self.quat, dtype=np.float64)
        if abs(float(np.linalg.norm(q)) - 1.0) > 1e-9:
            raise ContractError(f"quaternion must be unit norm, got {np.linalg.norm(q)}")
        object.__setattr__(self, "position", np.asarray(self.position, dtype=np.float64))
        object.__setattr__(self, "quat", q)

    @property
    def rotation(self) -> np.ndarray:
        return quat_to_rot(self.quat)


def quat_to_rot(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def rot_to_quat(r: np.ndarray) -> np.ndarray:
    """Rotation matrix -> unit quaternion with w >= 0 (deterministic sign)."""
    t = np.trace(r)
    if t > 0:
        s = np.sqrt(t + 1.0) * 2.0
        q = np.array([0.25 * s, (r[2, 1] - r[1, 2]) / s,
                      (r[0, 2] - r[2, 0]) / s, (r[1, 0] - r[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(r)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(1.0 + r[i, i] - r[j, j] - r[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (r[k, j] - r[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (r[j, i] + r[i, j]) / s
        q[1 + k] = (r[k, i] + r[i, k]) / s
    if q[0] < 0:
        q = -q
    return q / np.linalg.norm(q)


def rot_from_yaw_pitch(yaw: float, pitch: float) -> np.ndarray:
    """Camera-to-world rotation for a camera with yaw about world-y, then pitch."""
    cy, sy = np.cos(yaw), np.sin(yaw)
    cp, sp = np.cos(pitch), np.sin(pitch)
    forward = np.array([cp * sy, sp, cp * cy])
    up_world = np.array([0.0, 1.0, 0.0])
    right = np.cross(up_world, forward)
    nr = np.linalg.norm(right)
    if nr < 1e-12:  # looking straight up/down: fall back to yaw-aligned right
        right = np.array([cy, 0.0, -sy])
    else:
        right = right / nr
    down = np.cross(forward, right)
    down /= np.linalg.norm(down)
    return np.stack([right, down, forward], axis=1)


def pose_from_yaw_pitch(position, yaw, pitch, intrinsics) -> CameraState:
    q = rot_to_quat(rot_from_yaw_pitch(float(yaw), float(pitch)))
    return CameraState(position=np.asarray(position, dtype=np.float64),
                       quat=q, intrinsics=intrinsics)


def pixel_dirs_world(pose: CameraState) -> np.ndarray:
    """World-frame ray direction per pixel center, [H, W, 3], unit camera-z."""
    k = pose.intrinsics
    us = (np.arange(k.width) + 0.5 - k.cx) / k.focal
    vs = (np.arange(k.height) + 0.5 - k.cy) / k.focal
    gx, gy = np.meshgrid(us, vs)
    dirs_cam = np.stack([gx, gy, np.ones_like(gx)], axis=-1)
    return dirs_cam @ pose.rotation.T


def project_points(pose: CameraState, points: np.ndarray):
    """Project world points; returns (u, v, z) with z the camera depth."""
    rel = (np.atleast_2d(points) - pose.position) @ pose.rotation  # = R^T (P - t)
    z = rel[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = pose.intrinsics.focal * rel[:, 0] / z + pose.intrinsics.cx
        v = pose.intrinsics.focal * rel[:, 1] / z + pose.intrinsics.cy
    return u, v, z


def ray_patch_depths(origin: np.ndarray, dirs: np.ndarray, landmark) -> np.ndarray:
    """Hit depth of each ray against one planar patch (inf where it misses).

    `dirs` is [..., 3] with unit camera-z so the plane parameter equals depth.
    """
    n = landmark.normal
    denom = dirs @ n
    offset = float((landmark.center - origin) @ n)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = offset / denom
    hit = origin + t[..., None] * dirs
    rel = hit - landmark.center
    a = (rel @ landmark.u_hat) / landmark.hu
    b = (rel @ landmark.v_hat) / landmark.hv
    ok = np.isfinite(t) & (t > NEAR_PLANE) & (np.abs(a) <= 1.0) & (np.abs(b) <= 1.0)
    return np.where(ok, t, np.inf), a, b


def nearest_hit(origin: np.ndarray, dirs: np.ndarray, landmarks):
    """Z-buffer over all patches: (depth, landmark index, a, b) per ray.

    Depth is inf and index -1 where no patch is hit.
    """
    shape = dirs.shape[:-1]
    best_t = np.full(shape, np.inf)
    best_i = np.full(shape, -1, dtype=np.int32)
    best_a = np.zeros(shape)
    best_b = np.zeros(shape)
    for i, lm in enumerate(landmarks):
        t, a, b = ray_patch_depths(origin, dirs, lm)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        best_i = np.where(closer, i, best_i)
        best_a = np.where(closer, a, best_a)
        best_b = np.where(closer, b, best_b)
    return best_t, best_i, best_a, best_b


def visible_point_ids(pose: CameraState, points: np.ndarray, point_ids: np.ndarray,
                      landmarks, tol: float = 1e-6) -> np.ndarray:
    """IDs of points that project inside the image, in front of the camera,
    and are not strictly occluded by any patch (depth match within `tol`)."""
    u, v, z = project_points(pose, points)
    k = pose.intrinsics
    front = z > NEAR_PLANE
    inside = front & (u >= 0.0) & (u < k.width) & (v >= 0.0) & (v < k.height)
    idx = np.nonzero(inside)[0]
    if idx.size == 0:
        return np.array([], dtype=np.int64)
    dirs = (points[idx] - pose.position) / z[idx, None]
    t_min = np.full(idx.shape, np.inf)
    for lm in landmarks:
        t, _, _ = ray_patch_depths(pose.position, dirs, lm)
        t_min = np.minimum(t_min, t)
    unoccluded = t_min > z[idx] - tol
    return np.sort(np.asarray(point_ids)[idx[unoccluded]]).astype(np.int64)
