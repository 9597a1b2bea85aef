"""Downstream evaluation: zero-shot correspondence and depth probing."""

import json
from pathlib import Path

from .depth import (DepthEvalReport, ProbeConfig, absrel, bilinear_upsample_matrix,
                    delta1, depth_items_from_life, encode_features, evaluate_probe,
                    init_probe, probe_forward, train_probe)
from .flow import (EvalPair, FlowField, aepe, attention_to_flow,
                   eval_zeroshot_correspondence, make_flow_eval_pairs,
                   random_matching_flow, read_eval_pairs, write_eval_pairs)


def write_report(report: dict, path) -> Path:
    """Report JSON: {task, model_id, metrics, config, n_items}."""
    path = Path(path)
    slim = {k: report[k] for k in ("task", "model_id", "metrics", "config", "n_items")}
    path.write_text(json.dumps(slim, sort_keys=True, separators=(",", ":")) + "\n")
    return path


__all__ = [
    "DepthEvalReport", "ProbeConfig", "absrel", "bilinear_upsample_matrix", "delta1",
    "depth_items_from_life", "encode_features", "evaluate_probe", "init_probe",
    "probe_forward", "train_probe",
    "EvalPair", "FlowField", "aepe", "attention_to_flow", "eval_zeroshot_correspondence",
    "make_flow_eval_pairs", "random_matching_flow", "read_eval_pairs",
    "write_eval_pairs", "write_report",
]
