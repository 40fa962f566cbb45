"""Deterministic pseudo-random streams for reproducible training.

Every random choice in this package (train/test shuffling, bootstrap
resampling, per-node feature subsampling) is drawn from a SplitMix64
stream so that results depend only on ``(seed, stream index)`` and never
on thread count or call order.  The generator is fixed bit for bit:

    GAMMA  = 0x9E3779B97F4A7C15
    state  <- (state + GAMMA) mod 2**64
    z      <- state
    z      <- ((z XOR (z >> 30)) * 0xBF58476D1CE4E5B9) mod 2**64
    z      <- ((z XOR (z >> 27)) * 0x94D049BB133111EB) mod 2**64
    output <- z XOR (z >> 31)

Stream ``i`` of a master seed ``m`` starts from state
``mix64((m + (i + 1) * GAMMA) mod 2**64)`` where ``mix64`` is the
finalizer above (the three XOR/multiply lines).  A bounded draw maps a
raw output ``u`` to ``u mod n``; the modulo bias is below ``n / 2**64``
and irrelevant at the bounds used here (n <= a few million).

Batch helpers produce exactly the same values the scalar calls would:
output ``j`` of a batch is ``mix64(state + (j + 1) * GAMMA)``.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """The SplitMix64 output finalizer on a 64-bit integer."""
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def derive_stream_state(seed: int, index: int) -> int:
    """Initial state of substream `index` for a master `seed`."""
    if index < 0:
        raise ValueError(f"stream index must be >= 0, got {index}")
    return mix64((seed + (index + 1) * _GAMMA) & _MASK)


class SplitMix64:
    """A single SplitMix64 stream with scalar and vectorized draws."""

    __slots__ = ("_state",)

    def __init__(self, state: int):
        self._state = state & _MASK

    @classmethod
    def stream(cls, seed: int, index: int) -> "SplitMix64":
        return cls(derive_stream_state(seed, index))

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        return mix64(self._state)

    def next_below(self, n: int) -> int:
        """Draw an integer in [0, n)."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        return self.next_u64() % n

    def u64_batch(self, k: int) -> np.ndarray:
        """The next `k` raw outputs as a uint64 array (same values as
        `k` scalar next_u64 calls)."""
        steps = np.arange(1, k + 1, dtype=np.uint64)
        z = np.uint64(self._state) + steps * np.uint64(_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        self._state = (self._state + k * _GAMMA) & _MASK
        return z

    def below_batch(self, k: int, n: int) -> np.ndarray:
        """`k` bounded draws in [0, n) as an int64 array."""
        if n <= 0:
            raise ValueError(f"bound must be positive, got {n}")
        return (self.u64_batch(k) % np.uint64(n)).astype(np.int64)

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle driven by this stream."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]

    def sample_without_replacement(self, k: int, n: int) -> np.ndarray:
        """`k` distinct integers from [0, n), uniform over k-subsets.

        Draws bounded values in batches sized to the remaining need and
        keeps first occurrences; the first k distinct values of a uniform
        i.i.d. sequence form a uniform random k-permutation.
        """
        if k > n:
            raise ValueError(f"cannot sample {k} distinct values from {n}")
        if k == n:
            # Sampling everything is a no-op choice; draws nothing.
            return np.arange(n, dtype=np.int64)
        seen: dict[int, None] = {}
        while len(seen) < k:
            for v in self.below_batch(k - len(seen), n):
                if v not in seen:
                    seen[int(v)] = None
                    if len(seen) == k:
                        break
        return np.fromiter(seen.keys(), dtype=np.int64, count=k)
