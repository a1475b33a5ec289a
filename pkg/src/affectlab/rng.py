"""Seeded xoshiro256** generator.

State is four 64-bit words, seeded from a single integer through splitmix64
(the seeding procedure recommended by the xoshiro authors).  Floats take the
top 53 bits of each output.  The state can be read and restored through
:attr:`Xoshiro256.state`, which makes every draw reproducible from a log.
"""

import numpy as np

_MASK = (1 << 64) - 1


def _rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & _MASK


def splitmix64(seed):
    """Yield the splitmix64 sequence started at ``seed``."""
    x = seed & _MASK
    while True:
        x = (x + 0x9E3779B97F4A7C15) & _MASK
        z = x
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield z ^ (z >> 31)


class Xoshiro256:
    """xoshiro256** with a numpy-flavoured convenience surface."""

    def __init__(self, seed=0):
        gen = splitmix64(int(seed))
        self._s = [next(gen) for _ in range(4)]

    @property
    def state(self):
        return tuple(self._s)

    @state.setter
    def state(self, words):
        words = [int(w) & _MASK for w in words]
        if len(words) != 4 or not any(words):
            raise ValueError("xoshiro state must be four words, not all zero")
        self._s = words

    def next_u64(self):
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK, 7) * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self, size=None):
        """Uniform floats in [0, 1)."""
        if size is None:
            return (self.next_u64() >> 11) * (1.0 / (1 << 53))
        n = int(np.prod(size))
        nxt = self.next_u64
        out = np.fromiter(((nxt() >> 11) for _ in range(n)), dtype=np.float64, count=n)
        return (out * (1.0 / (1 << 53))).reshape(size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return low + (high - low) * self.random(size)

    def integers(self, n):
        """Unbiased integer in [0, n) by rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def permutation(self, n):
        """Fisher-Yates shuffle of ``range(n)``."""
        perm = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.integers(i + 1)
            perm[i], perm[j] = perm[j], perm[i]
        return np.array(perm, dtype=np.int64)

    def shuffle(self, items):
        """Return a shuffled copy of the sequence ``items``."""
        return [items[i] for i in self.permutation(len(items))]
