"""Counter-based, keyed random streams.

Every stream is derived from ``(seed, tag, *index)`` so that results never
depend on iteration order or on how work is split across threads.
"""

import zlib

import numpy as np

from cdp_twin.errors import ParameterError


def _tag_word(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    """Return an independent Philox generator keyed by seed, purpose tag and indices."""
    if int(seed) < 0 or any(int(i) < 0 for i in index):
        raise ParameterError(f"seed and stream indices must be non-negative, got {seed}, {index}")
    ss = np.random.SeedSequence([int(seed), _tag_word(tag), *(int(i) for i in index)])
    return np.random.Generator(np.random.Philox(ss))
