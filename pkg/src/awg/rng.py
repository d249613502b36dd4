"""Seeded random streams.

Every consumer of randomness asks for a named stream derived from one
64-bit root seed::

    key = splitmix64(splitmix64(seed) ^ fnv1a64(name))

and wraps ``key`` in numpy's PCG64. Streams with different names are
independent; the same (seed, name) pair always yields the same numbers on
every platform.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & _MASK64
    return h


def derive_seed(seed: int, name: str) -> int:
    return splitmix64(splitmix64(seed & _MASK64) ^ fnv1a64(name))


def stream(seed: int, name: str) -> np.random.Generator:
    """Return the generator for consumer ``name`` under root ``seed``."""
    return np.random.Generator(np.random.PCG64(derive_seed(seed, name)))
