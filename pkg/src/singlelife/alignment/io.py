"""CSV emitters/readers for CAS matrices and MDS coordinates."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .cas import CASMatrix


def write_cas_csv(matrix: CASMatrix, path) -> Path:
    path = Path(path)
    lines = ["model_id," + ",".join(matrix.model_ids)]
    for i, mid in enumerate(matrix.model_ids):
        lines.append(mid + "," + ",".join(repr(float(v)) for v in matrix.scores[i]))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_cas_csv(path) -> CASMatrix:
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("model_id,"):
        raise ConfigError(f"{path} is not a CAS matrix CSV")
    ids = lines[0].split(",")[1:]
    rows = []
    for line in lines[1:]:
        if not line:
            continue
        cells = line.split(",")
        rows.append([float(x) for x in cells[1:]])
    return CASMatrix(model_ids=ids, scores=np.asarray(rows))


def write_mds_csv(model_ids, coords: np.ndarray, path) -> Path:
    path = Path(path)
    lines = ["model_id,x,y"]
    for mid, (x, y) in zip(model_ids, coords):
        lines.append(f"{mid},{float(x)!r},{float(y)!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def read_mds_csv(path):
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "model_id,x,y":
        raise ConfigError(f"{path} is not an MDS coordinates CSV")
    ids, pts = [], []
    for line in lines[1:]:
        if not line:
            continue
        mid, x, y = line.split(",")
        ids.append(mid)
        pts.append((float(x), float(y)))
    return ids, np.asarray(pts)
