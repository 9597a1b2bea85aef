"""Pair index files: TSV plus a JSON sidecar with config and stats.

TSV columns: source_id, target_id, strategy, overlap (empty when absent),
aug_spec_json (empty when absent). Sidecar path is `<index>.tsv.json`.
"""

from __future__ import annotations

import json
from pathlib import Path

from ..errors import ConfigError
from ..model.augment import AugSpec
from .pairs import FramePair, PairIndex

HEADER = "source_id\ttarget_id\tstrategy\toverlap\taug_spec_json"


def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def write_pair_index(index: PairIndex, path) -> Path:
    path = Path(path)
    lines = [HEADER]
    for p in index.pairs:
        overlap = "" if p.overlap is None else repr(float(p.overlap))
        aug = "" if p.aug_spec is None else p.aug_spec.to_json()
        lines.append(f"{p.source_id}\t{p.target_id}\t{p.strategy}\t{overlap}\t{aug}")
    path.write_text("\n".join(lines) + "\n")
    sidecar_path(path).write_text(json.dumps(
        {"life_id": index.life_id, "config": index.config, "stats": index.stats},
        sort_keys=True, separators=(",", ":")) + "\n")
    return path


def read_pair_index(path) -> PairIndex:
    path = Path(path)
    lines = path.read_text().splitlines()
    if not lines or lines[0] != HEADER:
        raise ConfigError(f"{path} is not a pair index TSV (bad header)")
    pairs = []
    for line in lines[1:]:
        if not line:
            continue
        s, t, strategy, overlap, aug = line.split("\t")
        pairs.append(FramePair(int(s), int(t), strategy,
                               overlap=float(overlap) if overlap else None,
                               aug_spec=AugSpec.from_json(aug) if aug else None))
    meta = {"life_id": path.stem, "config": {}, "stats": {}}
    side = sidecar_path(path)
    if side.exists():
        meta.update(json.loads(side.read_text()))
    return PairIndex(meta["life_id"], pairs, meta["config"], meta["stats"])
