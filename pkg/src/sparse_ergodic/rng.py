"""Counter-based hashing RNG.

Every random bit in the package is a pure function of (seed, key...), so the
same lattice point or group element sees the same coin at every scale and on
every rerun.  The mixer is the splitmix64 finalizer; the scalar and numpy
paths agree bit for bit.
"""
from __future__ import annotations

import numpy as np

MASK = 0xFFFFFFFFFFFFFFFF
GOLDEN = 0x9E3779B97F4A7C15

# stream tags, so that different constructions never share coins
SPECKLED = 0x5EC1
PLAID = 0x91A1
GROUP = 0x6A0B
SHIFTS = 0x5A1F
TESTFN = 0x7E57


def _mix(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def hash64(seed: int, *keys: int) -> int:
    state = _mix((seed & MASK) + GOLDEN)
    for k in keys:
        state = _mix(((state ^ (k & MASK)) + GOLDEN) & MASK)
    return state


def uniform(seed: int, *keys: int) -> float:
    return (hash64(seed, *keys) >> 11) * 2.0**-53


def _mix_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def hash64_array(seed: int, prefix: tuple[int, ...], keys: np.ndarray) -> np.ndarray:
    """Vectorized hash64(seed, *prefix, *row) for each row of an integer array.

    ``keys`` has shape (n, k) (or (n,) for a single trailing key).
    """
    keys = np.asarray(keys, dtype=np.int64)
    if keys.ndim == 1:
        keys = keys[:, None]
    state = _mix((seed & MASK) + GOLDEN)
    for k in prefix:
        state = _mix(((state ^ (k & MASK)) + GOLDEN) & MASK)
    out = np.full(keys.shape[0], state, dtype=np.uint64)
    g = np.uint64(GOLDEN)
    for col in range(keys.shape[1]):
        out = _mix_np((out ^ keys[:, col].view(np.uint64)) + g)
    return out


def uniform_array(seed: int, prefix: tuple[int, ...], keys: np.ndarray) -> np.ndarray:
    h = hash64_array(seed, prefix, keys)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53
