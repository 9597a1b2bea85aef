"""Cross-model alignment: correspondence maps, CAS, MDS projection."""

from .cas import (DEFAULT_K, CASMatrix, TestSet, build_testset, cas, cas_matrix,
                  cas_over_testset, mutual_topk, null_baseline, topk_indices)
from .extract import CorrespondenceMap, LoadedModel, aggregate_logits, extract_map, load_model
from .io import read_cas_csv, read_mds_csv, write_cas_csv, write_mds_csv
from .mds import mds_2d, pairwise_distances

__all__ = [
    "DEFAULT_K", "CASMatrix", "TestSet", "build_testset", "cas", "cas_matrix",
    "cas_over_testset", "mutual_topk", "null_baseline", "topk_indices",
    "CorrespondenceMap", "LoadedModel", "aggregate_logits", "extract_map", "load_model",
    "read_cas_csv", "read_mds_csv", "write_cas_csv", "write_mds_csv",
    "mds_2d", "pairwise_distances",
]
