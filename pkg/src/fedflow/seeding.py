"""Deterministic RNG stream derivation.

Every stochastic choice in the workbench draws from a numpy Generator
created here, keyed by the run seed plus structured tags (round index,
client id, purpose string). Streams are independent and stable across
platforms: keys are hashed with SHA-256, never with Python's salted
``hash``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_key(*parts: int | str) -> int:
    """Hash a tag tuple to a 128-bit integer seed."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            h.update(b"s" + part.encode("utf-8"))
        else:
            h.update(b"i" + int(part).to_bytes(16, "little", signed=True))
        h.update(b"\x00")
    return int.from_bytes(h.digest()[:16], "little")


def derive_rng(*parts: int | str) -> np.random.Generator:
    """Independent Generator for the given tag tuple."""
    return np.random.default_rng(np.random.SeedSequence(derive_key(*parts)))


def client_round_rng(seed: int, round_index: int, client_tag: int) -> np.random.Generator:
    """Private stream for one client's local training in one global round."""
    return derive_rng(seed, "round", round_index, "client", client_tag)
