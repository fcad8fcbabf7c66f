"""Counter-based random streams keyed by (seed, purpose, row, col).

Each stream is a Philox generator whose key comes from hashing the tuple,
and whose counter addresses a fixed-size record (a frame, an image).
Any record can be regenerated on its own, so results do not depend on how
work is split across threads or processes.
"""

from __future__ import annotations

import numpy as np

# stream purposes
FRAMES = 1
TAILS = 2
CRB_IMAGES = 3
SWEEP = 4

_WORDS_PER_BLOCK = 4  # Philox4x64 emits four 64-bit words per counter step

TINY = 2.0 ** -54


def stream_key(seed: int, purpose: int, row: int = 0, col: int = 0) -> np.ndarray:
    return np.random.SeedSequence([seed, purpose, row, col]).generate_state(2, np.uint64)


def record_stride(words: int) -> int:
    """Round a record length up to whole Philox blocks."""
    return -(-words // _WORDS_PER_BLOCK) * _WORDS_PER_BLOCK


def generator(key, record: int = 0, stride: int = 0) -> np.random.Generator:
    """Generator positioned at the start of ``record`` of ``stride`` words."""
    if stride % _WORDS_PER_BLOCK:
        raise ValueError("stride must be a multiple of 4 words")
    return np.random.Generator(np.random.Philox(key=key, counter=record * stride // _WORDS_PER_BLOCK))


def uniform_records(key, first: int, count: int, words: int) -> np.ndarray:
    """Uniforms for records ``first .. first+count-1``, shape ``(count, words)``.

    Record ``r`` always holds the same values however the range is chosen.
    """
    stride = record_stride(words)
    block = generator(key, first, stride).random((count, stride))
    return block[:, :words]


def normal_from_uniform(u):
    """Standard normal deviates by inversion; keeps draws one-to-one with uniforms."""
    from scipy.special import ndtri

    return ndtri(np.clip(u, TINY, 1.0 - TINY))
