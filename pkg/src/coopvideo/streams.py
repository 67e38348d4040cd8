"""Named, splittable random streams.

Every random quantity in a run is drawn from a generator keyed by the run
seed plus a tuple of labels, so results do not depend on evaluation order
or on how work is split across processes.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_part(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError(f"stream keys must be non-negative, got {part}")
        return int(part)
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    if isinstance(part, float):
        # stable for values that are printed the same way
        return zlib.crc32(repr(part).encode("ascii"))
    raise TypeError(f"unsupported stream key {part!r}")


def derive_rng(seed: int, *keys) -> np.random.Generator:
    """Independent PCG64 generator for ``(seed, *keys)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key_part(k) for k in keys))
    return np.random.Generator(np.random.PCG64(ss))
