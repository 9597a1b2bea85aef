"""Deterministic seed derivation.

All randomness in the package flows from one root seed. Child streams are
derived by hashing the root together with a path of string/int labels, so
every module gets an independent, reproducible stream and adding a new
consumer never shifts the draws of an existing one.

Scheme: seed = first 8 bytes (little-endian) of
sha256(b"slseed|<root>|<label0>|<label1>|...").
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root: int, *labels) -> int:
    """Derive a 64-bit child seed from a root seed and a label path."""
    payload = "slseed|%d|%s" % (int(root), "|".join(str(x) for x in labels))
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(root: int, *labels) -> np.random.Generator:
    """A PCG64 generator seeded from `derive_seed(root, *labels)`."""
    return np.random.Generator(np.random.PCG64(derive_seed(root, *labels)))
