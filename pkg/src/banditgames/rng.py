"""Counter-based random streams.

Every run draws from numpy's Philox-4x64 generator with 10 rounds. The 128-bit
key is ``(seed, stream)`` and the counter starts at zero, so a port that
implements Philox-4x64-10 and numpy's conversions (53-bit doubles from the top
bits of each 64-bit output, ziggurat normals) reproduces the same draws.
Separate streams keep the perturbation directions, the cost noise and the
action sampling independent of each other and of the chunk size used by the
loops.
"""

from __future__ import annotations

import numpy as np

PERTURB = 0
NOISE = 1
SAMPLE = 2


def stream(seed: int, which: int) -> np.random.Generator:
    """Generator for one named stream of a run."""
    if seed < 0:
        raise ValueError("seeds must be nonnegative")
    key = np.array([seed, which], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def streams(seed: int) -> dict:
    return {name: stream(seed, idx) for name, idx in (("perturb", PERTURB), ("noise", NOISE), ("sample", SAMPLE))}
