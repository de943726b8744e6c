"""Deterministic, platform-stable seed derivation.

Python's builtin hash is salted per process, so task seeds are derived from a
SHA-256 digest of the key parts instead. Every component that needs its own
random stream gets a seed through here; nothing uses global RNG state.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Collapse (seed, subject, spec, ...) into a stable 63-bit integer."""
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def generator(*parts) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(*parts)))
