"""SplitMix64 streams and seed derivation"""

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_MUL_1 = 0xBF58476D1CE4E5B9
MIX_MUL_2 = 0x94D049BB133111EB
POSITION_STREAM_KEY = 0xA5A5A5A5A5A5A5A5


def mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * MIX_MUL_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_MUL_2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Scalar SplitMix64 generator.

    Output t (0-based) equals mix64(seed + (t + 1) * GOLDEN_GAMMA), which is
    what :func:`splitmix64_block` evaluates in bulk.
    """

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        return mix64(self.state)


def splitmix64_block(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """Outputs offset .. offset+count-1 of the stream seeded with ``seed``"""
    if count <= 0:
        return np.zeros(0, dtype=np.uint64)
    steps = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + steps * np.uint64(GOLDEN_GAMMA)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(MIX_MUL_1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(MIX_MUL_2)
        z = z ^ (z >> np.uint64(31))
    return z


def derive_seed(seed: int, *indices: int) -> int:
    """Chain SplitMix64 over (seed, index, index, ...).

    Each index feeds one mixing round, so the seed of one grid cell never depends
    on how many other cells exist.
    """
    state = seed & MASK64
    for index in indices:
        state = mix64((state + GOLDEN_GAMMA * (int(index) + 1)) & MASK64)
    return state
