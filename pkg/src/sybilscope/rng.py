"""Seed fan-out: one master seed, independent labeled substreams.

Every randomized component (synth, split, training) pulls its own stream
so changing one stage never perturbs another.
"""
from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, label: str) -> int:
    """Stable 64-bit child seed for (seed, label)."""
    digest = hashlib.sha256(f"{seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def substream(seed: int, label: str) -> random.Random:
    """A PRNG whose stream depends only on (seed, label)."""
    return random.Random(derive_seed(seed, label))
