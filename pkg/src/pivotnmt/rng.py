"""Deterministic random streams.

Every stochastic operation in this package takes an explicit handle created
here. The generator algorithm is recorded in checkpoint metadata so a run
can be reproduced bit-for-bit.
"""

from __future__ import annotations

import numpy as np

RngHandle = np.random.Generator

RNG_ALGORITHM = "numpy.random.PCG64"


def seed_rng(seed: int) -> RngHandle:
    """A deterministic stream; identical seeds yield identical streams."""
    return np.random.Generator(np.random.PCG64(int(seed)))


def split_rng(rng: RngHandle, n: int) -> list[RngHandle]:
    """Derive n independent child streams from one handle."""
    seeds = rng.integers(0, 2**63 - 1, size=n)
    return [seed_rng(int(s)) for s in seeds]
