"""Per-trial random streams derived from a master seed.

Each trial gets its own ``numpy.random.Generator`` seeded by a 64-bit mix of
(master seed, grid index, trial index). The mix is the SplitMix64 finalizer
applied after adding the 64-bit golden-ratio increment, so streams can be
created in any order or in any worker without coordination.
"""

import numpy as np

_MASK = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(x):
    """One SplitMix64 step on a 64-bit integer."""
    z = (x + GOLDEN_GAMMA) & _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def stream_seed(master_seed, grid_index, trial_index):
    """64-bit seed for one trial.

    Args:
        master_seed: Experiment seed (any int; reduced mod 2^64).
        grid_index: Position of the grid point in the experiment.
        trial_index: Trial number within the grid point.
    """
    h = splitmix64(int(master_seed) & _MASK)
    h = splitmix64(h ^ (int(grid_index) & _MASK))
    return splitmix64(h ^ (int(trial_index) & _MASK))


def trial_stream(master_seed, grid_index, trial_index):
    """Generator for one trial (PCG64 seeded with :func:`stream_seed`)."""
    return np.random.Generator(np.random.PCG64(stream_seed(master_seed, grid_index, trial_index)))


def as_generator(rng):
    """Accept a Generator, an int seed or None and return a Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)
