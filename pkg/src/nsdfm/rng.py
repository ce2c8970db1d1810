"""Seeded random streams keyed by ``(seed, purpose, index...)``.

Streams depend only on their key, never on call order, so replicate ``h``
sees the same draws whether run alone, in a loop or in another process.
"""
import zlib

import numpy as np


def _purpose_code(purpose: str) -> int:
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed: int, purpose: str, *index: int) -> np.random.Generator:
    key = [int(seed) & 0xFFFFFFFF, _purpose_code(purpose), *(int(i) for i in index)]
    return np.random.default_rng(np.random.SeedSequence(key))
