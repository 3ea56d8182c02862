"""Counter-keyed random substreams.

Every random task is addressed by a tuple key under a master seed, so the
stream a task sees never depends on which worker runs it or in what order.
"""
from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence]


def as_seedseq(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(int(seed))


def subseed(seed: SeedLike, *key: int) -> np.random.SeedSequence:
    """Child seed sequence at ``key`` below ``seed`` (keys nest)."""
    ss = as_seedseq(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def generator(seed: SeedLike, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(subseed(seed, *key)))
