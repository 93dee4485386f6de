"""Named, reproducible random streams derived from one top-level seed."""
from __future__ import annotations

import zlib

import numpy as np

RNG_ALGORITHM = "numpy.random.PCG64 via SeedSequence named substreams (crc32 spawn keys)"


def substream(seed: int, *names) -> np.random.Generator:
    """Independent generator for the path ``names`` under ``seed``.

    Names may be strings or ints; the same (seed, names) always gives the
    same stream, regardless of what other streams were drawn before.
    """
    key = tuple(n if isinstance(n, int) else zlib.crc32(str(n).encode()) for n in names)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=key)))
