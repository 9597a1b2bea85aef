"""Classical (Torgerson) multidimensional scaling of a CAS matrix.

Dissimilarity D = 1 - CAS; double-center B = -1/2 J (D.D) J and embed with
the top-2 eigenpairs. Output is centered at the origin with a deterministic
sign convention (first nonzero coordinate of each axis positive), so plots
are reproducible bit for bit.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError
from .cas import CASMatrix


def mds_2d(matrix: CASMatrix | np.ndarray) -> np.ndarray:
    """Embed n models into 2-D; exact for dissimilarities realizable in <= 2
    Euclidean dimensions."""
    s = matrix.scores if isinstance(matrix, CASMatrix) else np.asarray(matrix,
                                                                       dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise ContractError("CAS input must be a square matrix")
    if not (s == s.T).all():
        raise ContractError("CAS input must be exactly symmetric")
    n = s.shape[0]
    if n < 2:
        raise ContractError("MDS needs at least two models")
    d = 1.0 - s
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ (d * d) @ j
    evals, evecs = np.linalg.eigh((b + b.T) / 2.0)
    order = np.argsort(evals)[::-1][:2]
    coords = np.zeros((n, 2))
    for axis, idx in enumerate(order):
        lam = evals[idx]
        if lam > 1e-12:
            coords[:, axis] = evecs[:, idx] * np.sqrt(lam)
    coords -= coords.mean(axis=0)
    for axis in range(2):
        col = coords[:, axis]
        nz = np.nonzero(np.abs(col) > 1e-12)[0]
        if len(nz) and col[nz[0]] < 0:
            coords[:, axis] = -col
    return coords


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))
