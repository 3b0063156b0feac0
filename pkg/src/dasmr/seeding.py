"""Named random sub-streams derived from one run seed."""
from __future__ import annotations

import numpy as np

STREAMS = {"env": 0, "agent": 1, "replay": 2, "init": 3, "explore": 4}


def named_rng(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(STREAMS[name],))))
