"""Deterministic random streams.

Every Monte Carlo loop in the package draws from a Philox (counter-based)
generator keyed by ``(master seed, experiment tag, trial index)``.  Trials can
therefore run in any order or in parallel and still reproduce bit-for-bit.
"""

from __future__ import annotations

import zlib

import numpy as np


def tag_key(tag: str) -> int:
    """Stable 32-bit key for an experiment tag (``hash()`` is salted per process)."""
    return zlib.crc32(tag.encode("utf-8"))


def make_rng(seed: int, tag: str = "", trial: int = 0) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence([int(seed), tag_key(tag), int(trial)])
    return np.random.Generator(np.random.Philox(ss))


def as_rng(rng: np.random.Generator | int | None) -> np.random.Generator:
    """Accept a generator, an integer seed, or ``None`` (seed 0)."""
    if isinstance(rng, np.random.Generator):
        return rng
    return make_rng(0 if rng is None else int(rng))


def spawn(rng: np.random.Generator, count: int) -> list[np.random.Generator]:
    """Independent child generators, one per trial."""
    seeds = rng.integers(0, 2**63 - 1, size=count, dtype=np.int64)
    return [np.random.Generator(np.random.Philox(np.random.SeedSequence(int(s)))) for s in seeds]
