"""Seeded, splittable random streams.

Every stream is a Philox counter-based generator. Child streams are derived
from ``(master_seed, index)`` so that the stream handed to trial ``i`` does not
depend on how many other trials exist or on the order they run in.
"""

from __future__ import annotations

import numpy as np

Rng = np.random.Generator


def make_rng(seed: int | None = None, *path: int) -> Rng:
    """Return the stream at ``path`` under ``seed``.

    ``make_rng(s)`` is the root stream; ``make_rng(s, 3)`` is child 3 of it and
    ``make_rng(s, 3, 0)`` is child 0 of that child.
    """
    seq = np.random.SeedSequence(seed, spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(seq))


def split(rng: Rng, n: int) -> list[Rng]:
    """Split ``n`` independent child streams off ``rng``."""
    return [np.random.Generator(np.random.Philox(s)) for s in rng.bit_generator.seed_seq.spawn(n)]


def draw_index(cdf: np.ndarray, u: float | np.ndarray):
    """Inverse-CDF draw of outcome indices from uniforms ``u`` in [0, 1)."""
    idx = np.searchsorted(cdf, u, side="right")
    return np.minimum(idx, len(cdf) - 1)
