"""Deterministic seed derivation for reproducible, parallelizable streams.

Each experiment cell / sampling task derives its own 64-bit seed by hashing
the chain of tags that identifies it, so any cell can be recomputed in
isolation and cells can run in parallel without sharing generator state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable 64-bit hash of a tuple of ints/floats/strings."""
    h = hashlib.blake2b(digest_size=8)
    for part in parts:
        if isinstance(part, (int, np.integer)):
            token = f"i:{int(part)}"
        elif isinstance(part, float):
            token = f"f:{part!r}"
        else:
            token = f"s:{part}"
        h.update(token.encode())
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


def derive_rng(*parts) -> np.random.Generator:
    """Fresh generator seeded from the hashed tag chain."""
    return np.random.default_rng(derive_seed(*parts))
