"""Deterministic seed derivation.

One global seed fans out to every randomized subsystem (validation
sampling, order enumeration, tie-breaking) through labeled derivation, so
two subsystems can never consume the same random stream.
"""

from __future__ import annotations

import hashlib


def derive_seed(seed: int, *tags: str | int) -> int:
    """Derive a child seed from a parent seed and a purpose tag chain."""
    material = "\x1f".join([str(seed), *[str(t) for t in tags]])
    digest = hashlib.sha256(material.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
