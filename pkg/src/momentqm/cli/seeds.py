"""Splitmix64 seed derivation for reproducible sub-streams."""

from __future__ import annotations

import numpy as np

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(state: int) -> int:
    """One splitmix64 output for ``state`` (the state is advanced once first)."""
    z = (state + GOLDEN) & MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def substream_seed(seed: int, stream: int) -> int:
    """Seed of sub-stream ``stream``: the ``stream + 1``-th splitmix64 output from ``seed``."""
    return splitmix64((seed + stream * GOLDEN) & MASK)


def substream(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(substream_seed(seed, stream))
