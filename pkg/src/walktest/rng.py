"""Seed-stream plumbing.

Reproducibility contract: everything randomized in this package is driven by
a 64-bit master seed plus an index (trial number, matrix row, sweep job).
Stream ``i`` is ``SeedSequence(master, spawn_key=(i,))``, which numpy
guarantees equals ``SeedSequence(master).spawn(n)[i]``.  Deleting or
reordering trials therefore never changes the randomness of other trials,
and a single trial can be replayed in isolation.
"""

from __future__ import annotations

import numpy as np

__all__ = ["trial_rng", "spawn_rngs", "master_rng"]


def master_rng(seed: int) -> np.random.Generator:
    """Generator for whole-run draws (not tied to a trial index)."""
    return np.random.default_rng(np.random.SeedSequence(seed))


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for one trial/row; replayable without its batch."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def spawn_rngs(seed: int, n: int, start: int = 0) -> list[np.random.Generator]:
    """Streams for trials start..start+n-1 (batch form of trial_rng)."""
    seq = np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in seq.spawn(start + n)[start:]]
