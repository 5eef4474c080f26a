"""Seeded stream helpers.

Every stochastic routine takes either an integer seed, a ``SeedSequence`` or a
``numpy.random.Generator``. Sub-streams are derived by extending the spawn key
of a root ``SeedSequence`` so they are disjoint and independent of call order.
"""

import numpy as np


def as_seed_sequence(seed):
    """Coerce ``seed`` (int, None, SeedSequence or Generator) to a SeedSequence."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        # draw entropy from the generator itself so the caller's stream advances
        return np.random.SeedSequence(int(seed.integers(0, 2**63 - 1)))
    if seed is None or isinstance(seed, (int, np.integer)):
        return np.random.SeedSequence(None if seed is None else int(seed))
    raise TypeError(f"cannot build a seed sequence from {type(seed).__name__}")


def as_generator(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(as_seed_sequence(seed))


def substream(root, *key):
    """Generator for the sub-stream ``key`` (tuple of ints) below ``root``."""
    root = as_seed_sequence(root)
    seq = np.random.SeedSequence(
        root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key)
    )
    return np.random.default_rng(seq)


def child_sequence(root, *key):
    root = as_seed_sequence(root)
    return np.random.SeedSequence(
        root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key)
    )
