"""
Counter-based random streams. Every draw is addressed by (seed, stream, grid index,
chunk index), so a sample set does not depend on how chunks are spread over workers.
"""

from enum import IntEnum
from typing import List

import numpy as np

CHUNK_SIZE = 4096


class StreamId(IntEnum):
    MEAN = 1
    SMOOTHNESS = 2
    SMOOTHNESS_REVERSE = 3
    LEMMA1 = 4
    GEOMETRY = 5
    SAMPLE_MEASURE = 6
    MEASURE_BUILD = 7


def stream_generator(seed: int, stream: StreamId, *keys: int) -> np.random.Generator:
    """
    Generator for one chunk of one stream.
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValueError(f"Invalid seed={seed}. Must be a nonnegative integer")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(stream), *map(int, keys)))
    return np.random.Generator(np.random.Philox(sequence))


def chunk_sizes(total: int, chunk: int = CHUNK_SIZE) -> List[int]:
    if total < 1:
        raise ValueError(f"Invalid sample count={total}. Must be >= 1")
    full, rest = divmod(total, chunk)
    return [chunk] * full + ([rest] if rest else [])
