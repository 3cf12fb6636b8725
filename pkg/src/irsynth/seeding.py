"""Deterministic seed splitting.

Every random stream is derived from one root seed plus a path of string labels,
``derive(root, "slice", "2", "restart", "0")``. Labels are hashed with CRC-32
so streams do not depend on Python's randomized ``hash``.
"""

from __future__ import annotations

import zlib

import numpy as np


def _words(labels) -> list[int]:
    return [zlib.crc32(str(label).encode()) for label in labels]


def derive(root: int, *labels) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(root) & 0xFFFFFFFF, *_words(labels)])


def rng(root: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive(root, *labels))
