"""Deterministic RNG stream derivation.

Every random draw in the package comes from a generator built by
:func:`substream`, keyed by the master seed plus integer tags (purpose,
iteration, episode index, ...).  Results are therefore independent of
scheduling: any worker that processes episode ``(i, e)`` derives exactly
the same stream.
"""

from __future__ import annotations

import numpy as np

# Purpose tags: keep these distinct so streams never collide.
TAG_INIT = 1
TAG_TRAIN_EPISODE = 2
TAG_EVAL_EPISODE = 3
TAG_BASELINE = 4


def substream(master_seed: int, *tags: int) -> np.random.Generator:
    """Derive an independent generator from a master seed and integer tags."""
    return np.random.default_rng(np.random.SeedSequence((int(master_seed) & 0xFFFFFFFFFFFFFFFF, *map(int, tags))))
