"""Counter-based random streams.

Every random draw in the package comes from a generator derived from
``(master_seed, index, purpose)``. Streams for different indices or purposes
are independent, and the derivation does not depend on the order in which
streams are requested, so parallel loops reproduce serial results exactly.
"""

import zlib

import numpy as np

__all__ = ["purpose_key", "stream", "seed_sequence"]


def purpose_key(purpose):
    """Stable 32-bit integer for a purpose tag (CRC32 of the UTF-8 name)."""
    if isinstance(purpose, (int, np.integer)):
        return int(purpose)
    return zlib.crc32(str(purpose).encode("utf-8"))


def seed_sequence(master_seed, index=0, purpose="default"):
    if master_seed < 0 or index < 0:
        raise ValueError("seeds and indices must be non-negative")
    return np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=(int(index), purpose_key(purpose))
    )


def stream(master_seed, index=0, purpose="default"):
    """Philox generator for one (seed, index, purpose) triple."""
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, index, purpose)))
