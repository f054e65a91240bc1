"""Deterministic RNG substream derivation.

A run owns a single master seed. Every consumer of randomness (stream
generation, FTPL perturbations, geometric resampling, the deployed draw)
gets its own named substream so that changing how much randomness one
consumer uses never shifts another consumer's stream.

The label-to-seed map is a keyed blake2b hash, so the scheme is portable:
``substream_seed(master, label) = blake2b("fairstream:{master}:{label}")``
truncated to 64 bits. Bit-exact RNG equality across languages is a
non-goal; the structure (one named substream per consumer) is the contract.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream_seed", "substream", "per_round_rng"]


def substream_seed(master_seed: int, label: str) -> int:
    """64-bit seed for the named substream of a master seed."""
    payload = f"fairstream:{master_seed}:{label}".encode()
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def substream(master_seed: int, label: str) -> np.random.Generator:
    """Generator for the named substream of a master seed."""
    return np.random.default_rng(substream_seed(master_seed, label))


def per_round_rng(stream_seed: int, t: int) -> np.random.Generator:
    """Generator for round t, independent of the order rounds are visited."""
    return np.random.default_rng(np.random.SeedSequence(entropy=stream_seed, spawn_key=(t,)))
