"""Reproducible random streams keyed by ``(seed, replication, purpose)``."""
from __future__ import annotations

import secrets

import numpy as np


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the counter ``key`` under ``seed``.

    Streams for distinct keys are statistically independent and do not depend
    on how many other streams were drawn or in which order.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, *key])))


def fresh_seed() -> int:
    return secrets.randbits(63)
