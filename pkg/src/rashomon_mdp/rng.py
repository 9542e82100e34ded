"""Self-contained deterministic pseudo-random number generation.

Weight initialization and minibatch shuffling run on a xoshiro256**
generator seeded through splitmix64.  Keeping the generator in-package
(rather than using numpy's) pins every random draw to the algorithm
itself, so trained policies are bit-reproducible across numpy versions
and platforms.
"""

from __future__ import annotations

import numpy as np
from numba import njit

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True)
def _splitmix64_fill(seed: np.uint64, out: np.ndarray) -> None:
    state = seed
    for i in range(out.size):
        state = state + np.uint64(0x9E3779B97F4A7C15)
        z = state
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        out[i] = z ^ (z >> np.uint64(31))


@njit(cache=True)
def _xoshiro_fill(state: np.ndarray, out: np.ndarray) -> None:
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    for i in range(out.size):
        r = s1 * np.uint64(5)
        r = ((r << np.uint64(7)) | (r >> np.uint64(57))) * np.uint64(9)
        out[i] = r
        t = s1 << np.uint64(17)
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
    state[0], state[1], state[2], state[3] = s0, s1, s2, s3


@njit(cache=True)
def _fisher_yates(state: np.ndarray, perm: np.ndarray) -> None:
    s0, s1, s2, s3 = state[0], state[1], state[2], state[3]
    for i in range(perm.size - 1, 0, -1):
        bound = np.uint64(i + 1)
        # reject the low non-multiple-of-bound zone so j is unbiased
        reject_below = (np.uint64(0) - bound) % bound
        while True:
            r = s1 * np.uint64(5)
            r = ((r << np.uint64(7)) | (r >> np.uint64(57))) * np.uint64(9)
            t = s1 << np.uint64(17)
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = (s3 << np.uint64(45)) | (s3 >> np.uint64(19))
            if r >= reject_below:
                break
        j = np.int64(r % bound)
        perm[i], perm[j] = perm[j], perm[i]
    state[0], state[1], state[2], state[3] = s0, s1, s2, s3


class Xoshiro256StarStar:
    """xoshiro256** stream, seeded by expanding `seed` with splitmix64.

    `stream` selects a disjoint 4-word block of the splitmix64 expansion,
    giving independent substreams of one experiment seed (e.g. weight
    initialization vs. epoch shuffling).
    """

    def __init__(self, seed: int, stream: int = 0):
        if stream < 0:
            raise ValueError("stream must be nonnegative")
        words = np.empty(4 * (stream + 1), dtype=np.uint64)
        _splitmix64_fill(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), words)
        self._state = words[4 * stream : 4 * stream + 4].copy()
        if not self._state.any():
            self._state[0] = np.uint64(1)

    @classmethod
    def from_raw_state(cls, state: tuple[int, int, int, int]) -> "Xoshiro256StarStar":
        gen = cls.__new__(cls)
        gen._state = np.array(state, dtype=np.uint64)
        if not gen._state.any():
            raise ValueError("all-zero state is invalid for xoshiro256**")
        return gen

    def next_u64(self) -> int:
        out = np.empty(1, dtype=np.uint64)
        _xoshiro_fill(self._state, out)
        return int(out[0])

    def fill_u64(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        _xoshiro_fill(self._state, out)
        return out

    def random(self, n: int) -> np.ndarray:
        """n doubles uniform on [0, 1), using the top 53 bits per draw."""
        bits = self.fill_u64(n) >> np.uint64(11)
        return bits.astype(np.float64) * (2.0**-53)

    def uniform(self, low: float, high: float, n: int) -> np.ndarray:
        return low + (high - low) * self.random(n)

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n, dtype=np.int64)
        if n > 1:
            _fisher_yates(self._state, perm)
        return perm
