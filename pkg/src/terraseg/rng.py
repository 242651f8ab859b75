"""Portable, seedable randomness.

Everything random in terraseg (weight init, dataset split, epoch shuffles)
is derived from SplitMix64 streams so runs are reproducible bit for bit and
can be re-derived by any implementation that shares these three primitives:
FNV-1a hashing, SplitMix64 and Box-Muller.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def hash64(seed: int, key: str | bytes | int) -> int:
    """Derive a child seed: FNV-1a of ``key`` XOR ``seed``.

    Strings are hashed as UTF-8, integers as 8 little-endian bytes.
    """
    if isinstance(key, str):
        key = key.encode("utf-8")
    elif isinstance(key, int):
        key = (key & MASK64).to_bytes(8, "little")
    return fnv1a64(key) ^ (seed & MASK64)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Scalar SplitMix64 generator (pure Python ints)."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return _mix(self.state)

    def below(self, bound: int) -> int:
        """Integer in ``[0, bound)`` by modulo reduction."""
        return self.next_u64() % bound


def splitmix64_block(seed: int, count: int, start: int = 0) -> np.ndarray:
    """Outputs ``start .. start+count-1`` of the SplitMix64 stream for ``seed``.

    Output i is ``mix(seed + (i + 1) * gamma)``, so the stream can be
    produced without a Python-level loop.
    """
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed & MASK64) + idx * np.uint64(GOLDEN_GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def normal(seed: int, count: int) -> np.ndarray:
    """``count`` standard normal float64 draws via Box-Muller.

    Pair j consumes stream outputs 2j (radius, mapped into (0, 1]) and
    2j+1 (angle, mapped into [0, 1)); its cosine and sine halves are
    emitted in that order.
    """
    pairs = (count + 1) // 2
    raw = splitmix64_block(seed, 2 * pairs) >> np.uint64(11)
    u1 = (raw[0::2].astype(np.float64) + 1.0) * 2.0**-53
    u2 = raw[1::2].astype(np.float64) * 2.0**-53
    r = np.sqrt(-2.0 * np.log(u1))
    theta = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = r * np.cos(theta)
    out[1::2] = r * np.sin(theta)
    return out[:count]


def permutation(n: int, seed: int) -> list[int]:
    """Fisher-Yates shuffle of ``range(n)`` driven by SplitMix64."""
    rng = SplitMix64(seed)
    order = list(range(n))
    for i in range(n - 1, 0, -1):
        j = rng.below(i + 1)
        order[i], order[j] = order[j], order[i]
    return order
