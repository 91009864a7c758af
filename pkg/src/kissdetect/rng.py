"""Seeded splitmix64 generator used for every stochastic choice.

The same seed yields the same shuffles, crops, flips and initial weights in
any implementation of the generator.
"""
import numpy as np

_MASK = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def _mix(z):
    z = ((z ^ (z >> 30)) * _MUL1) & _MASK
    z = ((z ^ (z >> 27)) * _MUL2) & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    def __init__(self, seed=0):
        self.state = int(seed) & _MASK

    def next_u64(self):
        self.state = (self.state + GOLDEN_GAMMA) & _MASK
        return _mix(self.state)

    def random(self):
        """Uniform float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low, high):
        return low + (high - low) * self.random()

    def randbelow(self, n):
        """Unbiased integer in ``[0, n)`` by rejection sampling."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def bernoulli(self, p=0.5):
        return self.random() < p

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def permutation(self, n):
        return np.asarray(self.shuffle(list(range(n))), dtype=np.int64)

    def split(self):
        """Independent child stream seeded from this one."""
        return SplitMix64(self.next_u64())

    def random_array(self, size):
        """``size`` consecutive :meth:`random` draws as a float64 array."""
        k = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            z = np.uint64(self.state) + k * np.uint64(GOLDEN_GAMMA)
            z = (z ^ (z >> np.uint64(30))) * np.uint64(_MUL1)
            z = (z ^ (z >> np.uint64(27))) * np.uint64(_MUL2)
            z = z ^ (z >> np.uint64(31))
        self.state = (self.state + size * GOLDEN_GAMMA) & _MASK
        return (z >> np.uint64(11)).astype(np.float64) * (1.0 / (1 << 53))


def as_rng(seed_or_rng):
    if isinstance(seed_or_rng, SplitMix64):
        return seed_or_rng
    return SplitMix64(0 if seed_or_rng is None else seed_or_rng)
