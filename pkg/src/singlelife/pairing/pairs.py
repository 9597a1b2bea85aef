"""Mining training frame pairs from one life.

Four strategies: temporal (short forward gaps), spatial (high Jaccard overlap
of visible 3-D point sets), augmented (same frame, 2-D transform) and random
(uniform unrelated frames), plus their union. All generators are pure
functions of (life, config, seed) and return indexes sorted by
(source_id, target_id) so parallel candidate search cannot change results.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ChannelError, ContractError, EmptyIndexError
from ..model.augment import AugRanges, AugSpec, sample_aug
from ..seeding import rng_for
from ..synthlife.geometry import visible_point_ids

TEMPORAL = "temporal"
SPATIAL = "spatial"
AUGMENTED = "augmented"
RANDOM = "random"
UNION = "union"
STRATEGIES = (TEMPORAL, SPATIAL, AUGMENTED, RANDOM, UNION)


@dataclass(frozen=True)
class FramePair:
    source_id: int
    target_id: int
    strategy: str
    overlap: float | None = None
    aug_spec: AugSpec | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ContractError(f"unknown strategy {self.strategy!r}")
        if self.source_id == self.target_id and self.strategy != AUGMENTED:
            raise ContractError("source and target may coincide only for augmented pairs")


@dataclass
class PairIndex:
    life_id: str
    pairs: list
    config: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        keys = [(p.source_id, p.target_id, p.strategy) for p in self.pairs]
        if len(set(keys)) != len(keys):
            raise ContractError("duplicate (source, target, strategy) triples in index")
        self.stats.setdefault("total", len(self.pairs))

    def __len__(self):
        return len(self.pairs)


def _sorted_pairs(pairs):
    return sorted(pairs, key=lambda p: (p.source_id, p.target_id))


def temporal_pairs(life, gap_frames, pairs_per_anchor: int = 1, seed: int = 0) -> PairIndex:
    """Up to `pairs_per_anchor` forward-in-time targets per anchor frame,
    drawn uniformly from the gap window [gap_min, gap_max] (in frames)."""
    gap_min, gap_max = int(gap_frames[0]), int(gap_frames[1])
    if gap_min < 1 or gap_max < gap_min:
        raise ContractError(f"bad gap window [{gap_min}, {gap_max}]")
    n = len(life.frames)
    rng = rng_for(seed, "pairs", "temporal", life.life_id)
    pairs = []
    for anchor in range(n):
        lo, hi = anchor + gap_min, min(anchor + gap_max, n - 1)
        if lo > hi:
            continue
        window = np.arange(lo, hi + 1)
        take = min(pairs_per_anchor, len(window))
        targets = rng.choice(window, size=take, replace=False)
        for t in sorted(int(x) for x in targets):
            pairs.append(FramePair(anchor, t, TEMPORAL))
    if not pairs:
        raise EmptyIndexError(f"temporal window [{gap_min}, {gap_max}] is empty for "
                              f"every anchor of a {n}-frame life")
    cfg = {"strategy": TEMPORAL, "gap_frames": [gap_min, gap_max],
           "pairs_per_anchor": pairs_per_anchor, "seed": seed}
    return PairIndex(life.life_id, _sorted_pairs(pairs), cfg, {TEMPORAL: len(pairs)})


def visible_point_set(frame_or_pose, world, intrinsics=None, tol: float = 1e-6) -> set:
    """Point ids visible from a frame's pose: inside the image, in front of the
    camera, unoccluded by any world patch."""
    pose = getattr(frame_or_pose, "pose", frame_or_pose)
    if pose is None:
        raise ChannelError("visible_point_set needs the pose channel")
    if intrinsics is not None:
        from ..synthlife.geometry import CameraState
        pose = CameraState(position=pose.position, quat=pose.quat, intrinsics=intrinsics)
    ids = visible_point_ids(pose, world.points, world.point_ids, world.landmarks, tol=tol)
    return set(int(i) for i in ids)


def jaccard(a, b) -> float:
    """|a & b| / |a | b|; two empty sets score 0 (no evidence of overlap)."""
    a, b = set(a), set(b)
    union = len(a | b)
    if union == 0:
        return 0.0
    return len(a & b) / union


def _visibility_matrix(life, world=None):
    """Boolean [n_frames, n_points] visibility; recomputed from poses if needed."""
    have_vis = all(f.visible_points is not None for f in life.frames)
    if have_vis:
        max_id = max((int(f.visible_points.max()) for f in life.frames
                      if len(f.visible_points)), default=-1)
        mat = np.zeros((len(life.frames), max_id + 1), dtype=bool)
        for i, f in enumerate(life.frames):
            mat[i, np.asarray(f.visible_points, dtype=np.int64)] = True
        return mat
    if world is not None and all(f.pose is not None for f in life.frames):
        mat = np.zeros((len(life.frames), len(world.point_ids)), dtype=bool)
        for i, f in enumerate(life.frames):
            ids = visible_point_ids(f.pose, world.points, world.point_ids,
                                    world.landmarks)
            mat[i, ids] = True
        return mat
    raise ChannelError("spatial pairing needs the visibility channel (or poses plus "
                       "a world to recompute it)")


def jaccard_matrix(life, world=None) -> np.ndarray:
    """All-pairs Jaccard over per-frame visible point sets.

    Intersections are exact integer counts (float32 matmul is exact below
    2^24); the final division happens in float64 so thresholding agrees
    bit-for-bit with `jaccard` on explicit sets.
    """
    v = _visibility_matrix(life, world).astype(np.float32)
    inter = (v @ v.T).astype(np.float64)
    counts = v.sum(axis=1, dtype=np.float64)
    union = counts[:, None] + counts[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        j = np.where(union > 0, inter / union, 0.0)
    return j


def spatial_pairs(life, j_threshold: float, min_frame_gap: int | None = None,
                  max_pairs: int | None = None, seed: int = 0, world=None) -> PairIndex:
    """All ordered-(i<j) frame pairs with Jaccard >= threshold and a minimum
    temporal gap (default 5 seconds) so the temporal signal is not duplicated.
    Equals the brute-force all-pairs computation by construction."""
    if not (0.0 < j_threshold <= 1.0):
        raise ContractError(f"j_threshold must be in (0, 1], got {j_threshold}")
    if min_frame_gap is None:
        min_frame_gap = int(round(5.0 * life.fps))
    jm = jaccard_matrix(life, world)
    n = len(life.frames)
    ii, jj = np.triu_indices(n, k=max(min_frame_gap, 1))
    keep = jm[ii, jj] >= j_threshold
    candidates = list(zip(ii[keep].tolist(), jj[keep].tolist(),
                          jm[ii, jj][keep].tolist()))
    if max_pairs is not None and len(candidates) > max_pairs:
        rng = rng_for(seed, "pairs", "spatial", life.life_id)
        pick = rng.choice(len(candidates), size=max_pairs, replace=False)
        candidates = [candidates[k] for k in sorted(pick)]
    pairs = [FramePair(s, t, SPATIAL, overlap=float(ov)) for s, t, ov in candidates]
    cfg = {"strategy": SPATIAL, "j_threshold": j_threshold,
           "min_frame_gap": min_frame_gap, "max_pairs": max_pairs, "seed": seed}
    return PairIndex(life.life_id, _sorted_pairs(pairs), cfg, {SPATIAL: len(pairs)})


def augmented_pairs(life, n_pairs: int, aug_ranges: AugRanges | None = None,
                    seed: int = 0) -> PairIndex:
    """Same-frame pairs whose target is a random 2-D transform of the source."""
    if n_pairs < 1:
        raise ContractError("n_pairs must be >= 1")
    n = len(life.frames)
    if n_pairs > n:
        raise ContractError(f"cannot mine {n_pairs} augmented pairs from {n} frames "
                            "without duplicate (source, target, strategy) triples")
    aug_ranges = aug_ranges or AugRanges()
    rng = rng_for(seed, "pairs", "augmented", life.life_id)
    frames = np.sort(rng.choice(n, size=n_pairs, replace=False))
    pairs = [FramePair(int(f), int(f), AUGMENTED, aug_spec=sample_aug(rng, aug_ranges))
             for f in frames]
    cfg = {"strategy": AUGMENTED, "n_pairs": n_pairs, "seed": seed,
           "aug_ranges": {"scale": list(aug_ranges.scale), "gain": list(aug_ranges.gain),
                          "bias": list(aug_ranges.bias)}}
    return PairIndex(life.life_id, _sorted_pairs(pairs), cfg, {AUGMENTED: len(pairs)})


def random_pairs(life, n_pairs: int, seed: int = 0) -> PairIndex:
    """Uniform ordered pairs of two distinct frames; duplicates are rejected so
    the index keeps unique triples."""
    n = len(life.frames)
    if n < 2:
        raise ContractError("random pairing needs at least 2 frames")
    if n_pairs > n * (n - 1):
        raise ContractError(f"cannot draw {n_pairs} unique ordered pairs from {n} frames")
    rng = rng_for(seed, "pairs", "random", life.life_id)
    seen = set()
    pairs = []
    while len(pairs) < n_pairs:
        s = int(rng.integers(n))
        t = int(rng.integers(n - 1))
        if t >= s:
            t += 1
        if (s, t) in seen:
            continue
        seen.add((s, t))
        pairs.append(FramePair(s, t, RANDOM))
    cfg = {"strategy": RANDOM, "n_pairs": n_pairs, "seed": seed}
    return PairIndex(life.life_id, _sorted_pairs(pairs), cfg, {RANDOM: len(pairs)})


def union_pairs(temporal: PairIndex, spatial: PairIndex) -> PairIndex:
    """Set union with unordered {source, target} dedup; spatial overlap kept."""
    if temporal.life_id != spatial.life_id:
        raise ContractError(f"cannot union indexes of different lives: "
                            f"{temporal.life_id!r} vs {spatial.life_id!r}")
    merged: dict[frozenset, FramePair] = {}
    for p in list(temporal.pairs) + list(spatial.pairs):
        key = frozenset((p.source_id, p.target_id))
        prev = merged.get(key)
        if prev is None or (prev.overlap is None and p.overlap is not None):
            merged[key] = FramePair(p.source_id, p.target_id, UNION,
                                    overlap=p.overlap, aug_spec=p.aug_spec)
    pairs = _sorted_pairs(merged.values())
    stats = {"temporal": len(temporal), "spatial": len(spatial), UNION: len(pairs)}
    cfg = {"strategy": UNION, "from": [temporal.config, spatial.config]}
    return PairIndex(temporal.life_id, pairs, cfg, stats)
