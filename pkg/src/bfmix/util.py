"""Small shared utilities: deterministic RNG streams, hashing, JSON canonicalization."""

from __future__ import annotations

import hashlib
import json

import numpy as np

MASK64 = (1 << 64) - 1


def rng(seed: int, index: int = 0) -> np.random.Generator:
    """Counter-based random generator keyed by (seed, index).

    Philox is counter-based, so streams for different (seed, index) pairs are
    independent and reproducible regardless of draw order or thread count.
    """
    key = np.array([seed & MASK64, index & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def canonical_json(obj) -> str:
    """Serialize to JSON with sorted keys and stable float formatting.

    Floats go through Python's repr (the json default), which round-trips
    exactly; reruns with identical inputs produce identical bytes.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def content_hash(obj) -> str:
    """Short stable hash of a JSON-serializable object."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]
