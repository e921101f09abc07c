"""Deterministic seed derivation.

Per-item seeds are hashed from (global seed, stable item id) so that adding
items to a corpus never perturbs the outputs of existing items, and so that
worker processes reproduce the exact same streams regardless of scheduling.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(global_seed: int, item_id: str) -> int:
    """Stable 63-bit seed for one work item."""
    digest = hashlib.sha256(f"{global_seed}:{item_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def spawn_seeds(seed: int, n: int) -> list[int]:
    """n independent child seeds derived from one parent seed."""
    children = np.random.SeedSequence(seed).spawn(n)
    return [int(c.generate_state(1, np.uint64)[0] >> 1) for c in children]


def rng_for(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)
