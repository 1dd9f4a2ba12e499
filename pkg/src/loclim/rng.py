"""Deterministic seed splitting for reproducible parallel Monte Carlo.

Every random draw in this package comes from a ``numpy.random.Generator``
seeded through :func:`substream`, so results are bit-identical regardless
of the order in which replicates are executed or how many workers run them.

The mixer is splitmix64: each path element is finalized and folded into the
running state, so ``substream(seed, r)`` and ``substream(seed, r, component)``
give statistically independent 64-bit stream ids.
"""
from __future__ import annotations

import numpy as np

_M64 = (1 << 64) - 1


def splitmix64(z: int) -> int:
    """One splitmix64 finalization step (Steele, Lea & Flood mixer)."""
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


def substream(seed: int, *path: int) -> int:
    """Derive a 64-bit stream id from ``seed`` and an index path.

    The rule is ``h <- splitmix64(h ^ splitmix64(p))`` for each path element
    ``p``, starting from ``h = seed``.  Distinct paths give distinct streams;
    the construction is associative-free, so ``substream(substream(s, a), b)``
    differs from ``substream(s, a, b)`` and callers must pick one convention.
    This package always passes the full path in a single call.
    """
    h = seed & _M64
    for p in path:
        h = splitmix64(h ^ splitmix64(p & _M64))
    return h


def generator(seed: int, *path: int) -> np.random.Generator:
    """A fresh PCG64 generator on the substream addressed by ``path``."""
    return np.random.default_rng(substream(seed, *path))


def kahan_sum(values: np.ndarray) -> float:
    """Compensated summation (Neumaier variant) in index order.

    Used for reductions whose result must not depend on how work was
    chunked: chunks accumulate into an indexed array first and this
    function reduces that array in a fixed order.
    """
    s = 0.0
    c = 0.0
    for v in np.asarray(values, dtype=float).ravel():
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c
