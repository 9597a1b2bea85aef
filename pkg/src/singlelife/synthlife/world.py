"""Procedural textured worlds: a floor, perimeter walls, floating panels,
and a bank of stable 3-D surface points used for co-visibility mining.

Albedo patterns are smooth (soft-edged checker or low-frequency sine noise),
which keeps flow-warping error small while still giving the learner texture
and parallax.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..seeding import rng_for


@dataclass(frozen=True)
class Landmark:
    center: np.ndarray   # (3,)
    u_hat: np.ndarray    # unit in-plane axis
    v_hat: np.ndarray    # unit in-plane axis, orthogonal to u_hat
    hu: float            # half extent along u_hat, > 0
    hv: float
    normal: np.ndarray   # unit, u_hat x v_hat
    pattern: dict = field(default_factory=dict)

    @property
    def area(self) -> float:
        return 4.0 * self.hu * self.hv


def make_landmark(center, u_dir, v_dir, hu, hv, pattern) -> Landmark:
    u = np.asarray(u_dir, dtype=np.float64)
    u = u / np.linalg.norm(u)
    v = np.asarray(v_dir, dtype=np.float64)
    v = v - (v @ u) * u
    v = v / np.linalg.norm(v)
    n = np.cross(u, v)
    return Landmark(center=np.asarray(center, dtype=np.float64), u_hat=u, v_hat=v,
                    hu=float(hu), hv=float(hv), normal=n / np.linalg.norm(n),
                    pattern=pattern)


@dataclass(frozen=True)
class World:
    seed: int
    bounds: tuple          # (extent_x, extent_y, extent_z); x,z centered, y in [0, ey]
    landmarks: tuple
    points: np.ndarray     # (P, 3) positions on landmark surfaces
    point_ids: np.ndarray  # (P,) stable unique ids
    point_landmark: np.ndarray  # (P,) owning landmark index


def _random_pattern(rng: np.random.Generator) -> dict:
    kind = "checker" if rng.random() < 0.5 else "noise"
    c0 = rng.uniform(0.08, 0.92, size=3)
    c1 = rng.uniform(0.08, 0.92, size=3)
    if kind == "checker":
        return {"kind": kind, "c0": c0, "c1": c1,
                "fu": float(rng.uniform(1.0, 3.0)), "fv": float(rng.uniform(1.0, 3.0)),
                "pu": float(rng.uniform(0, np.pi)), "pv": float(rng.uniform(0, np.pi)),
                "sharp": float(rng.uniform(1.5, 3.0))}
    waves = [(float(rng.uniform(0.5, 2.5)), float(rng.uniform(0.5, 2.5)),
              float(rng.uniform(0, 2 * np.pi))) for _ in range(3)]
    return {"kind": kind, "c0": c0, "c1": c1, "waves": waves}


def pattern_value(pattern: dict, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Smooth scalar texture in [0, 1] at local plane coordinates (a, b in [-1, 1])."""
    if pattern["kind"] == "checker":
        s = np.sin(np.pi * pattern["fu"] * (a + 1.0) + pattern["pu"]) \
            * np.sin(np.pi * pattern["fv"] * (b + 1.0) + pattern["pv"])
        return 0.5 + 0.45 * np.tanh(pattern["sharp"] * s)
    acc = np.zeros_like(np.asarray(a, dtype=np.float64))
    for fa, fb, ph in pattern["waves"]:
        acc = acc + np.sin(2 * np.pi * (fa * a + fb * b) + ph)
    return np.clip(0.5 + acc / (2 * len(pattern["waves"])), 0.0, 1.0)


def albedo(landmark: Landmark, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    val = pattern_value(landmark.pattern, a, b)[..., None]
    c0 = np.asarray(landmark.pattern["c0"])
    c1 = np.asarray(landmark.pattern["c1"])
    return c0 + (c1 - c0) * val


def generate_world(seed: int, n_landmarks: int = 18, n_points: int = 600,
                   bounds=(24.0, 5.0, 24.0)) -> World:
    """Deterministic world from a seed: floor + 4 walls + `n_landmarks` panels."""
    if n_landmarks < 1 or n_points < 1:
        raise ConfigError("need at least one landmark and one point")
    ex, ey, ez = (float(b) for b in bounds)
    if ex <= 0 or ey <= 0 or ez <= 0:
        raise ConfigError(f"world bounds must be positive, got {bounds}")
    rng = rng_for(seed, "world")
    lms = [
        # floor and perimeter walls, slightly inset so they stay within bounds
        make_landmark((0, 0, 0), (1, 0, 0), (0, 0, 1), ex / 2, ez / 2, _random_pattern(rng)),
        make_landmark((ex / 2, ey / 2, 0), (0, 0, 1), (0, 1, 0), ez / 2, ey / 2,
                      _random_pattern(rng)),
        make_landmark((-ex / 2, ey / 2, 0), (0, 0, 1), (0, 1, 0), ez / 2, ey / 2,
                      _random_pattern(rng)),
        make_landmark((0, ey / 2, ez / 2), (1, 0, 0), (0, 1, 0), ex / 2, ey / 2,
                      _random_pattern(rng)),
        make_landmark((0, ey / 2, -ez / 2), (1, 0, 0), (0, 1, 0), ex / 2, ey / 2,
                      _random_pattern(rng)),
    ]
    for _ in range(n_landmarks):
        hu = float(rng.uniform(0.5, 1.6))
        hv = float(rng.uniform(0.5, 1.4))
        cx = float(rng.uniform(-0.4 * ex + hu, 0.4 * ex - hu))
        cz = float(rng.uniform(-0.4 * ez + hu, 0.4 * ez - hu))
        cy = float(rng.uniform(hv + 0.1, min(ey - hv - 0.1, 2.6)))
        yaw = float(rng.uniform(0, 2 * np.pi))
        tilt = float(rng.uniform(-0.15, 0.15))
        u_dir = (np.cos(yaw), 0.0, np.sin(yaw))
        v_dir = (np.sin(tilt) * np.sin(yaw), np.cos(tilt), -np.sin(tilt) * np.cos(yaw))
        lms.append(make_landmark((cx, cy, cz), u_dir, v_dir, hu, hv, _random_pattern(rng)))

    areas = np.array([lm.area for lm in lms])
    owners = rng.choice(len(lms), size=n_points, p=areas / areas.sum())
    ab = rng.uniform(-1.0, 1.0, size=(n_points, 2))
    pts = np.stack([lms[i].center + a * lms[i].hu * lms[i].u_hat + b * lms[i].hv * lms[i].v_hat
                    for i, (a, b) in zip(owners, ab)])
    return World(seed=int(seed), bounds=(ex, ey, ez), landmarks=tuple(lms),
                 points=pts, point_ids=np.arange(n_points, dtype=np.int64),
                 point_landmark=owners.astype(np.int64))
