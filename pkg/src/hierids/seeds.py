"""Named RNG substreams derived from a single root seed.

Every random decision in the pipeline pulls from a generator obtained here,
so any stage can be re-run in isolation and still reproduce the run it was
part of.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _label_words(labels: tuple) -> list[int]:
    digest = hashlib.sha256("/".join(str(x) for x in labels).encode("utf-8")).digest()
    return [int.from_bytes(digest[4 * i : 4 * (i + 1)], "little") for i in range(4)]


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for (seed, *labels), stable across runs and call sites."""
    entropy = [int(seed) % (1 << 63), *_label_words(labels)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *labels) -> int:
    """A plain integer seed for (seed, *labels), for APIs that take ints."""
    return int(substream(seed, *labels).integers(0, 1 << 62))
