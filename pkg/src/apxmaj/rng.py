"""Splittable seeding.

Every random routine in the package takes an explicit 64-bit root seed and
derives per-task generators as ``rng_for(root, *path)`` where ``path`` is a
tuple of ints/strings naming the task (level index, copy index, ...).  Derived
streams are independent, reproducible, and insensitive to evaluation order,
which is what lets Monte Carlo loops parallelize without changing results.
"""

from __future__ import annotations

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def derive_seed(root: int, *path: int | str) -> int:
    """Hash (root seed, task path) down to a fresh 64-bit seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(int(root & MASK64).to_bytes(8, "little"))
    for part in path:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8") + b"\x00")
        else:
            h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
    return int.from_bytes(h.digest(), "little")


def rng_for(root: int, *path: int | str) -> np.random.Generator:
    """Generator seeded from the derived (root, path) seed."""
    return np.random.default_rng(derive_seed(root, *path))
