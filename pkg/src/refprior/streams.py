"""Counter-based random substreams.

Each (purpose, i, j) triple addresses its own Philox stream: the key holds
the user seed and a purpose tag, the counter's two high words hold i and j.
Streams are therefore reproducible in any order and on any number of
workers, and they never overlap unless one draws more than 2**128 blocks.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

PURPOSES = {
    "reference": 1,
    "discrepancy": 2,
    "information": 3,
    "prior-draw": 4,
    "diagnostic": 5,
}


def substream(seed: int, purpose: str, i: int, j: int = 0) -> np.random.Generator:
    """Generator for the (purpose, i, j) substream of ``seed``."""
    tag = PURPOSES[purpose]
    key = np.array([int(seed) & _MASK64, tag], dtype=np.uint64)
    counter = np.array([0, 0, int(j) & _MASK64, int(i) & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key, counter=counter))
