"""Seeded random streams.

Every random draw in the package goes through :func:`stream`, which maps a
base seed plus a path of integers (e.g. ``(SPLIT, epoch)``) to an
independent generator. Adding a new path never perturbs existing ones, so
adding repeats or epochs leaves earlier results bit-identical.
"""

import numpy as np

# Written into every report/split header.
RNG_ID = "numpy-PCG64DXSM/SeedSequence-v1"

# Top-level stream labels.
SPLIT = 1
NEGATIVES = 2
INIT = 3
DROPOUT = 4
EGO = 5
GRADCHECK = 6
REPEAT = 7


def stream(seed: int, *path: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64DXSM(seq))


def derive_seed(seed: int, *path: int) -> int:
    """A 63-bit integer seed derived from ``(seed, *path)``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(seq.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
