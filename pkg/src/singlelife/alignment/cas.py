"""Correspondence Alignment Score between independently trained models.

For each source patch, each model nominates its top-k most-attended target
patches; the score is the average fraction of agreement over patches and over
a test set of image pairs. Rank-based, so it is exactly invariant to strictly
increasing transforms of either map. Ties break toward the lower patch index,
making the metric total and platform-independent.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..errors import ContractError
from ..pairing.pairs import temporal_pairs
from .extract import CorrespondenceMap, LoadedModel, extract_map

DEFAULT_K = 5


def topk_indices(row: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest entries; ties resolved toward lower index."""
    if k > row.shape[-1]:
        raise ContractError(f"k={k} exceeds row length {row.shape[-1]}")
    order = np.argsort(-row, axis=-1, kind="stable")
    return order[..., :k]


def _topk_mask(scores: np.ndarray, k: int) -> np.ndarray:
    n = scores.shape[0]
    idx = topk_indices(scores, k)
    mask = np.zeros_like(scores, dtype=bool)
    mask[np.arange(n)[:, None], idx] = True
    return mask


def mutual_topk(map_i, map_j, patch: int, k: int = DEFAULT_K) -> float:
    """Fraction of shared top-k target patches for one source patch."""
    a = map_i.scores if isinstance(map_i, CorrespondenceMap) else np.asarray(map_i)
    b = map_j.scores if isinstance(map_j, CorrespondenceMap) else np.asarray(map_j)
    top_a = set(topk_indices(a[patch], k).tolist())
    top_b = set(topk_indices(b[patch], k).tolist())
    return len(top_a & top_b) / k


def cas(map_i, map_j, k: int = DEFAULT_K) -> float:
    """Single-pair alignment: mean mutual top-k agreement over source patches."""
    a = map_i.scores if isinstance(map_i, CorrespondenceMap) else np.asarray(map_i)
    b = map_j.scores if isinstance(map_j, CorrespondenceMap) else np.asarray(map_j)
    if a.shape != b.shape:
        raise ContractError(f"map shapes disagree: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ContractError("correspondence maps must be 2-D")
    mask_a = _topk_mask(a, k)
    mask_b = _topk_mask(b, k)
    mtopk = (mask_a & mask_b).sum(axis=1) / k
    return float(mtopk.mean())


@dataclass
class TestSet:
    """Held-out image pairs used to probe model alignment."""
    pairs: list                      # [(x_s, x_t), ...] float arrays
    pair_ids: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if not self.pair_ids:
            self.pair_ids = [f"pair{i:04d}" for i in range(len(self.pairs))]
        if len(set(self.pair_ids)) != len(self.pair_ids):
            raise ContractError("duplicate pair ids in test set")

    def __len__(self):
        return len(self.pairs)


def build_testset(lives, pairs_per_life: int, gap_frames=(1, 10), seed: int = 0) -> TestSet:
    """Sample temporal pairs uniformly from held-out lives (deduplicated)."""
    images, ids = [], []
    for life in lives:
        idx = temporal_pairs(life, gap_frames, pairs_per_anchor=1,
                             seed=seed + len(ids))
        pool = idx.pairs
        rng = np.random.default_rng(seed + len(ids) + 1)
        pick = rng.choice(len(pool), size=min(pairs_per_life, len(pool)), replace=False)
        for p in sorted(int(x) for x in pick):
            pair = pool[p]
            images.append((life.frames[pair.source_id].image,
                           life.frames[pair.target_id].image))
            ids.append(f"{life.life_id}:{pair.source_id}->{pair.target_id}")
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate pairs sampled into the test set")
    return TestSet(pairs=images, pair_ids=ids, seed=seed)


def _maps_for(model: LoadedModel, testset: TestSet, threads: int = 1,
              cache_dir=None, head_mode: str = "mean", row_softmax: bool = False):
    """Extract (or load cached) maps for every pair, in pair order."""
    def one(i):
        if cache_dir is not None:
            safe = testset.pair_ids[i].replace("/", "_").replace(":", "_")
            path = Path(cache_dir) / f"{model.model_id}__{safe}.npy"
            if path.exists():
                return np.load(path)
        x_s, x_t = testset.pairs[i]
        m = extract_map(model, x_s, x_t, head_mode=head_mode, row_softmax=row_softmax,
                        pair_id=testset.pair_ids[i]).scores
        if cache_dir is not None:
            Path(cache_dir).mkdir(parents=True, exist_ok=True)
            np.save(path, m)
        return m

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(testset))))
    return [one(i) for i in range(len(testset))]


def cas_over_testset(model_a: LoadedModel, model_b: LoadedModel, testset: TestSet,
                     k: int = DEFAULT_K, threads: int = 1, cache_dir=None) -> float:
    """Mean per-pair CAS over the test set (fixed pair order, so the reduction
    is independent of extraction scheduling)."""
    if model_a.arch.n_patches != model_b.arch.n_patches:
        raise ContractError("models have different patch counts")
    maps_a = _maps_for(model_a, testset, threads, cache_dir)
    maps_b = _maps_for(model_b, testset, threads, cache_dir)
    scores = [cas(a, b, k) for a, b in zip(maps_a, maps_b)]
    return float(np.mean(scores))


@dataclass
class CASMatrix:
    model_ids: list
    scores: np.ndarray   # symmetric, unit diagonal
    k: int = DEFAULT_K

    def __post_init__(self):
        s = np.asarray(self.scores, dtype=np.float64)
        if s.shape[0] != s.shape[1] or s.shape[0] != len(self.model_ids):
            raise ContractError("CAS matrix shape does not match model ids")
        if not (s == s.T).all():
            raise ContractError("CAS matrix must be exactly symmetric")
        self.scores = s


def cas_matrix(models, testset: TestSet, k: int = DEFAULT_K, threads: int = 1,
               cache_dir=None) -> CASMatrix:
    """Pairwise CAS over a model collection (a reference model may simply be
    included as one more entry). Upper triangle computed once, mirrored."""
    models = list(models)
    if len(models) < 2:
        raise ContractError("cas_matrix needs at least two models")
    n_patches = {m.arch.n_patches for m in models}
    if len(n_patches) != 1:
        raise ContractError("all models must share the same patch count")
    ids = [m.model_id for m in models]
    if len(set(ids)) != len(ids):
        raise ContractError("duplicate model ids")
    all_maps = [_maps_for(m, testset, threads, cache_dir) for m in models]
    n = len(models)
    out = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            score = float(np.mean([cas(a, b, k) for a, b in
                                   zip(all_maps[i], all_maps[j])]))
            out[i, j] = out[j, i] = score
    return CASMatrix(model_ids=ids, scores=out, k=k)


def null_baseline(n_patches: int, k: int = DEFAULT_K) -> float:
    """Expected CAS of two independent random rankings: k / N."""
    return k / n_patches
