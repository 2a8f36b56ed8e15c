"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by the
master seed plus a tuple of integer counters.  A stream depends only on its
key, never on how many other streams were drawn before it, so results do not
depend on execution order or worker count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _as_key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    key = int(part)
    if key < 0:
        raise ValueError(f"stream keys must be non-negative, got {part!r}")
    return key


def stream(seed: int, *keys) -> np.random.Generator:
    """Independent generator for ``(seed, *keys)``; string keys are hashed."""
    if seed is None:
        raise ValueError("a master seed is mandatory")
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_as_key(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def path_normals(seed: int, index: int, size: int, tag: str = "path") -> np.ndarray:
    """Standard normals driving path ``index`` of a batch."""
    return stream(seed, tag, index).standard_normal(size)


def child_seed(seed: int, *keys) -> int:
    """Derive an integer seed for a sub-task (used when a sub-task takes a seed)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_as_key(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))
