"""Per-replication random streams."""

from __future__ import annotations

import numpy as np


def seed_stream(master_seed: int, replication_index: int) -> np.random.Generator:
    """Independent PCG64 stream keyed by ``(master_seed, replication_index)``."""
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(int(replication_index),))
    return np.random.Generator(np.random.PCG64(seq))
