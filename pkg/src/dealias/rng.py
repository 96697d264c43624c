"""Deterministic random streams: xoshiro256++ with splitmix64 seeding.

Two documented conventions share one generator family so every stream is
reproducible from a 64-bit seed alone, independent of numpy version:

* ``Xoshiro256pp`` — a single sequential stream for scalar draws
  (scene parameters, categorical choices).
* ``fill_uniform``/``fill_normal`` — array fills running 256 interleaved
  lanes, lane j seeded from a splitmix64 chain, sample i taken from lane
  i mod 256 at step i div 256. Lane count is fixed; outputs are identical
  for any request length.

Per-scene seeds derive as ``derive_seed(master, index)`` =
splitmix64(splitmix64(master) XOR (index + 1)).
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_LANES = 256


def _splitmix64_step(state: int) -> tuple[int, int]:
    state = (state + _GOLDEN) & _MASK
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    z ^= z >> 31
    return state, z


def splitmix64_sequence(seed: int, n: int) -> list[int]:
    state = seed & _MASK
    out = []
    for _ in range(n):
        state, z = _splitmix64_step(state)
        out.append(z)
    return out


def derive_seed(master: int, index: int) -> int:
    """Hash (master, index) into an independent 64-bit stream seed."""
    _, a = _splitmix64_step(master & _MASK)
    _, b = _splitmix64_step(a ^ ((index + 1) & _MASK))
    return b


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256pp:
    """Sequential xoshiro256++ stream for scalar draws."""

    def __init__(self, seed: int):
        self._s = splitmix64_sequence(seed, 4)
        self._spare_normal: float | None = None

    def next_u64(self) -> int:
        s = self._s
        result = (_rotl((s[0] + s[3]) & _MASK, 23) + s[0]) & _MASK
        t = (s[1] << 17) & _MASK
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def uniform(self, lo: float = 0.0, hi: float = 1.0) -> float:
        u = (self.next_u64() >> 11) * 2.0**-53
        return lo + (hi - lo) * u

    def integer(self, n: int) -> int:
        """Draw from {0, ..., n-1}. Bias is O(n/2^53), negligible for small n."""
        return min(int(self.uniform() * n), n - 1)

    def choice(self, items):
        return items[self.integer(len(items))]

    def normal(self) -> float:
        if self._spare_normal is not None:
            z = self._spare_normal
            self._spare_normal = None
            return z
        u1 = max(self.uniform(), 2.0**-53)
        u2 = self.uniform()
        r = math.sqrt(-2.0 * math.log(u1))
        self._spare_normal = r * math.sin(2.0 * math.pi * u2)
        return r * math.cos(2.0 * math.pi * u2)


class _LaneBlock:
    """Vectorized xoshiro256++ over the fixed 256-lane layout."""

    def __init__(self, seed: int):
        raw = splitmix64_sequence(seed, 4 * _LANES)
        arr = np.array(raw, dtype=np.uint64).reshape(_LANES, 4)
        self._s = [arr[:, i].copy() for i in range(4)]

    def next_block(self) -> np.ndarray:
        s0, s1, s2, s3 = self._s
        tot = s0 + s3
        k23, k41 = np.uint64(23), np.uint64(41)
        result = ((tot << k23) | (tot >> k41)) + s0
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        k45, k19 = np.uint64(45), np.uint64(19)
        self._s = [s0, s1, s2, (s3 << k45) | (s3 >> k19)]
        return result

    def uniforms(self, n: int) -> np.ndarray:
        steps = -(-n // _LANES)
        blocks = np.empty((steps, _LANES), dtype=np.uint64)
        for i in range(steps):
            blocks[i] = self.next_block()
        u = (blocks.reshape(-1)[:n] >> np.uint64(11)).astype(np.float64)
        return u * 2.0**-53


def fill_uniform(seed: int, n: int, lo: float = 0.0, hi: float = 1.0) -> np.ndarray:
    u = _LaneBlock(seed).uniforms(n)
    return lo + (hi - lo) * u


def fill_normal(seed: int, n: int) -> np.ndarray:
    # Box-Muller over consecutive uniform pairs; an odd tail draws one extra pair.
    m = -(-n // 2)
    u = _LaneBlock(seed).uniforms(2 * m)
    u1 = np.maximum(u[0::2], 2.0**-53)
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    ang = (2.0 * np.pi) * u2
    z = np.empty(2 * m)
    z[0::2] = r * np.cos(ang)
    z[1::2] = r * np.sin(ang)
    return z[:n]
