"""Seeded random-stream derivation.

All randomness flows from one root seed through named substreams built on
seed sequences, so (seed, labels) -> stream is stable across platforms and
identical whether work items run serially or in parallel.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_entropy(label) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError("stream labels must be nonnegative")
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for the substream named by ``labels`` under a root seed."""
    entropy = [_as_entropy(seed)] + [_as_entropy(x) for x in labels]
    return np.random.default_rng(np.random.SeedSequence(entropy))
