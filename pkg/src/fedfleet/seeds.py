"""Deterministic sub-seed derivation.

A single master seed fans out to every randomized stage (trip synthesis,
weight init, client sampling, dropout, splits) without cross-module coupling:
each consumer gets ``child_seed(master, role, index)``.
"""

import hashlib


def child_seed(master: int, role: str, index: int = 0) -> int:
    """64-bit seed derived from (master, role, index) via SHA-256."""
    payload = f"{master}:{role}:{index}".encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")
