"""Seed derivation shared by every stochastic routine.

A seed is either a non-negative integer or a tuple of non-negative integers
``(entropy, k1, k2, ...)``.  Child seeds are obtained by appending keys, and
every generator is built from ``SeedSequence(entropy, spawn_key=keys)``, so
the draws of a child never depend on how many siblings were consumed.
"""

from __future__ import annotations

import numpy as np

# purpose tags used as the first key of derived seeds
ENV = 0
WALK = 1
BM = 2
TRIAL = 3


def normalize(seed) -> tuple[int, ...]:
    if isinstance(seed, np.random.SeedSequence):
        return (int(seed.entropy),) + tuple(int(k) for k in seed.spawn_key)
    if isinstance(seed, (int, np.integer)):
        seed = (int(seed),)
    out = tuple(int(s) for s in seed)
    if not out or any(s < 0 for s in out):
        raise ValueError(f"seed must be a non-negative integer or tuple, got {seed!r}")
    return out


def child(seed, *keys: int) -> tuple[int, ...]:
    """Seed of the sub-stream labelled by ``keys``."""
    return normalize(seed) + tuple(int(k) for k in keys)


def sequence(seed, *keys: int) -> np.random.SeedSequence:
    s = child(seed, *keys)
    return np.random.SeedSequence(s[0], spawn_key=s[1:])


def generator(seed, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(sequence(seed, *keys)))


def bit_generator(seed, *keys: int) -> np.random.SFC64:
    """Fast bit generator feeding the walk kernels with raw 64-bit words."""
    return np.random.SFC64(sequence(seed, *keys))
