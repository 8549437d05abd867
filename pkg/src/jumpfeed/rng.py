"""Reproducible RNG streams for parallel trajectory ensembles.

A single 64-bit master seed expands into independent per-trajectory streams
via a splitmix64-based hash: stream k is seeded with
``mix(mix(master + (k+1)*GOLDEN) ^ GOLDEN)``.  The hash uses only 64-bit
integer arithmetic, so it is stable across platforms and Python versions.
The kernels then draw from a splitmix64 sequence started at that seed.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def mix64(z: int) -> int:
    """The splitmix64 output permutation."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return (z ^ (z >> 31)) & MASK64


def stream_seed(master_seed: int, index: int) -> int:
    """Derive the 64-bit seed of trajectory stream ``index``."""
    if index < 0:
        raise ValueError("stream index must be >= 0")
    z = (int(master_seed) + (index + 1) * GOLDEN) & MASK64
    return mix64(mix64(z) ^ GOLDEN)
