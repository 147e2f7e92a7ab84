"""Counter-based random streams.

Every stream is identified by a 64-bit key.  Draw number ``c`` of the
stream with key ``k`` is the SplitMix64 finaliser applied to
``k + (c + 1) * 0x9E3779B97F4A7C15`` (mod 2**64), so any draw can be
recomputed from ``(key, counter)`` alone and streams with different keys
never share state.

Keys are split off a master seed with :func:`stream_key`, which delegates
to :class:`numpy.random.SeedSequence` spawn keys: the stream for
``(seed, index)`` is the one numpy would hand to the ``index``-th child of
``SeedSequence(seed)``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 1.0 / 9007199254740992.0  # 2**-53


@njit(inline="always")
def mix64(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


@njit(inline="always")
def unit(z):
    """Map a 64-bit word to a double in [0, 1)."""
    return (z >> np.uint64(11)) * _TO_UNIT


@njit(cache=True)
def _uniforms(key, counter, n):
    out = np.empty(n)
    s = np.uint64(key) + np.uint64(counter) * GOLDEN
    for i in range(n):
        s += GOLDEN
        out[i] = unit(mix64(s))
    return out


def stream_key(seed: int, index: int = 0) -> np.uint64:
    """Key of the ``index``-th stream derived from ``seed``."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(index,))
    return ss.generate_state(1, dtype=np.uint64)[0]


def stream_keys(seed: int, indices) -> np.ndarray:
    return np.array([stream_key(seed, int(i)) for i in indices], dtype=np.uint64)


class Stream:
    """A seeded, counter-based stream of uniforms.

    ``Stream(seed, index)`` and ``Stream.from_key(stream_key(seed, index))``
    produce the same draws.  ``counter`` is the number of draws consumed.
    """

    def __init__(self, seed: int = 0, index: int = 0):
        self.key = stream_key(seed, index)
        self.counter = 0

    @classmethod
    def from_key(cls, key, counter: int = 0) -> "Stream":
        obj = cls.__new__(cls)
        obj.key = np.uint64(key)
        obj.counter = int(counter)
        return obj

    def random(self, size: int | None = None):
        n = 1 if size is None else int(size)
        out = _uniforms(self.key, np.uint64(self.counter), n)
        self.counter += n
        return float(out[0]) if size is None else out

    def exponential(self, size: int | None = None):
        u = self.random(size)
        return -np.log1p(-u) if size is not None else float(-np.log1p(-u))

    def __repr__(self):
        return f"Stream(key={int(self.key):#018x}, counter={self.counter})"
