"""SplitMix64 generator for reproducible random initial data.

Pure 64-bit integer arithmetic, so a ``(seed, n)`` pair yields the same
doubles on every platform and numpy version:

    state += 0x9E3779B97F4A7C15
    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB
    z = z ^ (z >> 31)
    u = (z >> 11) * 2**-53          # uniform in [0, 1)

all operations modulo 2**64.
"""
import numpy as np

_MASK = (1 << 64) - 1


def splitmix64(seed, n):
    """``n`` raw 64-bit outputs as Python ints."""
    state = int(seed) & _MASK
    out = []
    for _ in range(int(n)):
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        out.append(z ^ (z >> 31))
    return out


def uniform(seed, n, low=-1.0, high=1.0):
    """``n`` doubles uniform in ``[low, high)``."""
    u = np.array([(z >> 11) for z in splitmix64(seed, n)], dtype=np.float64) * 2.0 ** -53
    return low + (high - low) * u
