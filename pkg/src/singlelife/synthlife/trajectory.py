"""Camera trajectory synthesis.

Three trajectory classes:
  walk   - steady forward motion with a wandering heading, small rotational
           jitter; steers away from world bounds.
  indoor - loitering around one spot with wide, frequent head rotation
           (per-frame angular std deliberately larger than `walk`).
  static - a fixed camera, the non-life control.

All noise is low-pass filtered white noise from a seeded generator, so a
(seed, spec) pair maps to exactly one trajectory.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..seeding import rng_for

TRAJECTORY_KINDS = ("walk", "indoor", "static")


@dataclass(frozen=True)
class TrajectorySpec:
    kind: str = "walk"
    speed_mps: float = 1.1          # walk only
    heading_rate_std: float = 0.55  # rad/s of smoothed heading drift (walk)
    yaw_jitter_std: float = 0.030   # rad, per-frame look jitter (walk)
    pitch_jitter_std: float = 0.020
    indoor_yaw_rate_std: float = 1.0   # rad/s, indoor head sweep
    indoor_pos_std: float = 0.25       # m, indoor loiter radius scale
    indoor_pitch_std: float = 0.060
    eye_height: float = 1.6
    base_pitch: float = -0.10       # slight downward gaze
    smooth_s: float = 0.8           # noise low-pass window, seconds
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TRAJECTORY_KINDS:
            raise ConfigError(f"unknown trajectory kind {self.kind!r}; "
                              f"choose from {TRAJECTORY_KINDS}")


def _smooth_noise(rng: np.random.Generator, n: int, fps: float, smooth_s: float):
    """Unit-variance low-pass noise, length n."""
    half = max(int(round(smooth_s * fps)), 1)
    kernel = np.exp(-0.5 * (np.arange(-3 * half, 3 * half + 1) / half) ** 2)
    kernel /= np.sqrt((kernel ** 2).sum())
    white = rng.normal(size=n + kernel.size - 1)
    return np.convolve(white, kernel, mode="valid")


def synthesize_trajectory(spec: TrajectorySpec, bounds, n_frames: int, fps: float,
                          seed: int):
    """Per-frame (positions [T,3], yaw [T], pitch [T], clamp_warnings list)."""
    ex, ey, ez = bounds
    rng = rng_for(seed, "traj", spec.kind)
    dt = 1.0 / fps
    margin = 1.5
    warnings: list[str] = []
    eye = min(spec.eye_height, ey - 0.2)

    if spec.kind == "static":
        pos = np.tile(np.array([0.0, eye, 0.0]), (n_frames, 1))
        yaw = np.full(n_frames, float(rng.uniform(0, 2 * np.pi)))
        pitch = np.full(n_frames, spec.base_pitch)
        return pos, yaw, pitch, warnings

    if spec.kind == "indoor":
        center = np.array([float(rng.uniform(-0.25 * ex, 0.25 * ex)), eye,
                           float(rng.uniform(-0.25 * ez, 0.25 * ez))])
        wander_x = _smooth_noise(rng, n_frames, fps, spec.smooth_s * 2) * spec.indoor_pos_std
        wander_z = _smooth_noise(rng, n_frames, fps, spec.smooth_s * 2) * spec.indoor_pos_std
        bob = 0.02 * np.sin(2 * np.pi * 0.9 * np.arange(n_frames) * dt)
        pos = center + np.stack([wander_x, bob, wander_z], axis=1)
        yaw0 = float(rng.uniform(0, 2 * np.pi))
        yaw = yaw0 + np.cumsum(_smooth_noise(rng, n_frames, fps, spec.smooth_s)
                               * spec.indoor_yaw_rate_std * dt)
        pitch = spec.base_pitch + _smooth_noise(rng, n_frames, fps, spec.smooth_s) \
            * spec.indoor_pitch_std
        pos = _clamp_positions(pos, bounds, margin, warnings)
        return pos, yaw, pitch, warnings

    # walk
    drift = _smooth_noise(rng, n_frames, fps, spec.smooth_s) * spec.heading_rate_std * dt
    speed = spec.speed_mps * (1.0 + 0.1 * _smooth_noise(rng, n_frames, fps, 2.0))
    pos = np.zeros((n_frames, 3))
    heading = np.zeros(n_frames)
    p = np.array([float(rng.uniform(-0.2 * ex, 0.2 * ex)), eye,
                  float(rng.uniform(-0.2 * ez, 0.2 * ez))])
    h = float(rng.uniform(0, 2 * np.pi))
    for i in range(n_frames):
        wall_dist = min(ex / 2 - abs(p[0]), ez / 2 - abs(p[2]))
        if wall_dist < 2.0 * margin:
            target = float(np.arctan2(-p[0], -p[2]))  # toward the world center
            diff = float(np.arctan2(np.sin(target - h), np.cos(target - h)))
            h += float(np.clip(diff, -0.12, 0.12))
        h += drift[i]
        heading[i] = h
        pos[i] = p
        f = np.array([np.sin(h), 0.0, np.cos(h)])
        p = p + f * max(float(speed[i]), 0.2) * dt
    bob = 0.03 * np.sin(2 * np.pi * 1.8 * np.arange(n_frames) * dt)
    pos[:, 1] = eye + bob
    pos = _clamp_positions(pos, bounds, margin, warnings)
    yaw = heading + _smooth_noise(rng, n_frames, fps, 0.4) * spec.yaw_jitter_std
    pitch = spec.base_pitch + _smooth_noise(rng, n_frames, fps, 0.4) * spec.pitch_jitter_std
    return pos, yaw, pitch, warnings


def _clamp_positions(pos: np.ndarray, bounds, margin: float, warnings: list):
    ex, ey, ez = bounds
    lo = np.array([-ex / 2 + margin, 0.2, -ez / 2 + margin])
    hi = np.array([ex / 2 - margin, ey - 0.2, ez / 2 - margin])
    clipped = np.clip(pos, lo, hi)
    n_clamped = int((np.abs(clipped - pos) > 1e-12).any(axis=1).sum())
    if n_clamped:
        warnings.append(f"camera clamped to world bounds on {n_clamped} frames")
    return clipped
