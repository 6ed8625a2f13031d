"""Deterministic seed derivation.

All randomness in the engine flows from one top-level integer seed, expanded
into per-module / per-item streams by hashing the seed together with string
key parts (SHA-256, first 8 bytes, little-endian). Python's builtin ``hash``
is salted per process and is never used.
"""

from __future__ import annotations

import hashlib

import numpy as np

_SEP = b"\x1f"


def derive_seed(*parts: object) -> int:
    """Derive a 64-bit seed from arbitrary key parts.

    Parts are joined by a separator byte after ``str()`` conversion, so
    ``derive_seed(1, "ab")`` and ``derive_seed("1a", "b")`` differ.
    """
    payload = _SEP.join(str(p).encode("utf-8") for p in parts)
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(*parts: object) -> np.random.Generator:
    """A PCG64 generator seeded by `derive_seed(*parts)`."""
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
