"""Seed-derived uniform substreams.

Each (master seed, source index, purpose) triple maps to its own
``numpy.random.Generator`` through ``SeedSequence`` spawn keys, so sources can
be generated in any order or in parallel and still reproduce bit for bit.
"""
from __future__ import annotations

from enum import IntEnum

import numpy as np

MASK64 = (1 << 64) - 1


class Purpose(IntEnum):
    ON = 0
    OFF = 1
    RATE = 2
    SNAPSHOT = 3
    PHASE = 4
    SNAPSHOT_RATE = 5


def substream(seed: int, source: int = 0, purpose: Purpose | int = 0) -> np.random.Generator:
    if seed < 0 or seed > MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(source), int(purpose)))
    return np.random.Generator(np.random.PCG64(ss))


def open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    """``n`` uniforms strictly inside (0, 1): midpoints of a 2**-52 grid.

    With 52-bit integers ``k + 0.5`` is exact in double precision, so the
    largest value is ``1 - 2**-53`` and never rounds up to 1.
    """
    raw = rng.bit_generator.random_raw(n)
    return ((raw >> np.uint64(12)).astype(np.float64) + 0.5) * 2.0**-52
