"""Frame-pair mining by temporal, spatial, augmented and random strategies."""

from .io import read_pair_index, sidecar_path, write_pair_index
from .pairs import (AUGMENTED, RANDOM, SPATIAL, STRATEGIES, TEMPORAL, UNION, FramePair,
                    PairIndex, augmented_pairs, jaccard, jaccard_matrix, random_pairs,
                    spatial_pairs, temporal_pairs, union_pairs, visible_point_set)

__all__ = [
    "AUGMENTED", "RANDOM", "SPATIAL", "STRATEGIES", "TEMPORAL", "UNION",
    "FramePair", "PairIndex", "augmented_pairs", "jaccard", "jaccard_matrix",
    "random_pairs", "spatial_pairs", "temporal_pairs", "union_pairs",
    "visible_point_set", "read_pair_index", "sidecar_path", "write_pair_index",
]
