"""Deterministic per-record RNG derivation.

Every randomized stage derives its randomness from (global_seed, *tokens)
so that parallel and serial runs, and runs that process records in a
different order, produce identical output.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, *tokens) -> int:
    h = hashlib.sha256()
    h.update(str(int(seed)).encode("utf-8"))
    for tok in tokens:
        h.update(b"\x1f")
        h.update(str(tok).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def derive_rng(seed: int, *tokens) -> np.random.Generator:
    """RNG keyed by a global seed plus stable string tokens (e.g. record ids)."""
    return np.random.default_rng(derive_seed(seed, *tokens))
