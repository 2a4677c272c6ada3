"""Counter-based random substreams.

Every consumer of randomness derives its own Philox generator from the
master seed plus an integer key path, e.g. ``(ASCENT, round, t, j, k)``.
No generator is ever shared between measures or iterations, so results do
not depend on the order in which workers run.
"""

from __future__ import annotations

import numpy as np

# Key-path tags; distinct first components keep the stages disjoint.
INIT = 1
ASCENT = 2
SNAP = 3
EVAL = 4
GROW = 5
MISC = 6


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        raise TypeError("pass an integer seed or SeedSequence, not a Generator")
    return np.random.SeedSequence(int(seed))


def child(seed, *key) -> np.random.SeedSequence:
    """Deterministic child sequence at ``key`` below ``seed``."""
    ss = seed_sequence(seed)
    return np.random.SeedSequence(ss.entropy, spawn_key=tuple(ss.spawn_key) + tuple(int(k) for k in key))


def generator(seed, *key) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(child(seed, *key)))


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed, or a SeedSequence."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.Generator(np.random.Philox(seed_sequence(rng)))
