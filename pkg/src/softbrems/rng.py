"""Deterministic random-number plumbing.

All stochastic operations in this package take an explicit
``numpy.random.Generator``.  We standardize on the Philox bit generator:
it is counter-based, so streams are reproducible bit-for-bit across
platforms, and child streams can be split off a parent without
correlation.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Create the package-standard generator for a given seed."""
    return np.random.Generator(np.random.Philox(seed))


def split_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Split `n` independent child generators off `rng` (advances the parent)."""
    return list(rng.spawn(n))
