"""Counter-based uniform streams, one per copy.

Draw ``j`` of stream ``i`` under master seed ``s`` is a pure function of
``(s, i, j)``: the SplitMix64 finalizer applied to ``key(s, i) + (j+1)*GOLDEN``.
No generator state is shared between copies, so campaigns give identical
output for any partition of the copy range across workers.

The same arithmetic is compiled into the campaign kernels; this module is the
plain-Python reference.
"""

from __future__ import annotations

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
_INV53 = 1.0 / (1 << 53)


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def stream_key(seed: int, index: int) -> int:
    return mix64((seed & MASK64) ^ mix64((index * GOLDEN) & MASK64))


def to_unit(bits: int) -> float:
    """Top 53 bits as a double in [0, 1)."""
    return (bits >> 11) * _INV53


class CounterStream:
    """Sequential view of one counter-based stream.

    >>> s = CounterStream(7, 0)
    >>> 0.0 <= s.uniform() < 1.0
    True
    """

    def __init__(self, seed: int, index: int) -> None:
        self.seed = seed
        self.index = index
        self._key = stream_key(seed, index)
        self._counter = 0

    def at(self, j: int) -> float:
        return to_unit(mix64(self._key + (j + 1) * GOLDEN))

    def uniform(self) -> float:
        u = self.at(self._counter)
        self._counter += 1
        return u

    def __iter__(self):
        while True:
            yield self.uniform()
