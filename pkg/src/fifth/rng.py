"""Deterministic 64-bit PRNG.

Every random choice in the engine flows from one seed through SplitMix64
streams, so runs are replayable bit-for-bit. Subsystems get independent
streams via fork() with a stable label.
"""

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _mix(z):
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9 & _MASK
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB & _MASK
    return z ^ (z >> 31)


class SplitMix64:
    """splitmix64 stream; state advances by the golden-ratio increment."""

    __slots__ = ("_state",)

    def __init__(self, seed):
        self._state = seed & _MASK

    def next_u64(self):
        self._state = (self._state + _GOLDEN) & _MASK
        return _mix(self._state)

    def uniform(self):
        """Float in [0, 1) with 53 bits of precision."""
        return (self.next_u64() >> 11) * (2.0**-53)

    def randint(self, n):
        """Integer in [0, n)."""
        if n <= 0:
            raise ValueError("randint needs n > 0")
        return self.next_u64() % n

    def randrange(self, lo, hi):
        """Integer in [lo, hi] inclusive."""
        return lo + self.randint(hi - lo + 1)

    def choice(self, seq):
        return seq[self.randint(len(seq))]

    def shuffle(self, items):
        """Fisher-Yates, in place."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]

    def fork(self, label):
        """Independent child stream derived from this seed and a label."""
        h = self._state
        for ch in str(label).encode("utf-8"):
            h = _mix((h ^ ch) * 0x100000001B3 & _MASK)
        return SplitMix64(_mix(h))
