"""Per-sample seed derivation.

Sample ``s`` of a run with master seed ``m`` always draws from the generator
seeded with ``splitmix64(splitmix64(m) ^ s)``, whatever the worker layout.
"""

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def sample_seed(master_seed: int, index: int) -> int:
    return splitmix64(splitmix64(int(master_seed) & MASK64) ^ (int(index) & MASK64))


def rng_for(master_seed: int, index: int) -> tuple[int, np.random.Generator]:
    seed = sample_seed(master_seed, index)
    return seed, np.random.Generator(np.random.PCG64(seed))
