"""Counter-based random streams keyed by experiment coordinates.

Every stream is a Philox generator whose key is derived from a master seed
and a tuple of integer coordinates, so that any (trial, node, iteration, role)
can be regenerated independently of execution order.
"""

from __future__ import annotations

import numpy as np

ROLE_POSITIONS = 0
ROLE_SIGNAL = 1
ROLE_NOISE = 2
ROLE_DITHER = 3


def stream(seed: int, *coords: int) -> np.random.Generator:
    """Return an independent generator for ``seed`` at ``coords``."""
    if seed < 0 or any(c < 0 for c in coords):
        raise ValueError("seed and stream coordinates must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(c) for c in coords))
    return np.random.Generator(np.random.Philox(ss))
