"""Reproducible random streams keyed by (seed, stream id)."""
from __future__ import annotations

import numpy as np

__all__ = ["make_rng"]


def make_rng(seed: int, *key: int) -> np.random.Generator:
    """Counter-based generator for the stream ``(seed, *key)``.

    Streams with different keys are statistically independent and the
    result does not depend on creation order.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))

