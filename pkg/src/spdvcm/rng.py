"""Deterministic random number streams.

Every stochastic routine in the package draws from a stream keyed by the
user seed plus a structural path (study name, replicate index, bootstrap
index, ...).  Streams are independent counter-based Philox generators, so
results are bit-identical whether replicates run serially or in parallel
and regardless of scheduling order.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _key_part(part: int | str) -> int:
    """Map a path element to a stable non-negative integer."""
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream path elements must be >= 0, got {part}")
        return int(part)
    digest = hashlib.sha256(part.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *path: int | str) -> np.random.Generator:
    """Return the Generator for stream (seed, *path).

    The same (seed, path) always yields the same stream; distinct paths
    yield statistically independent streams.
    """
    seq = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_part(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))
