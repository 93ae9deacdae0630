"""Seed derivation and random generators.

Every random stream in the package is derived from a master seed through a
chain of splitmix64 mixes, one per key.  Keys may be integers or strings;
strings are first hashed to 64 bits with BLAKE2b so that the derivation does
not depend on Python's randomized ``hash``.
"""

from __future__ import annotations

import hashlib
from typing import Union

import numpy as np

MASK64 = (1 << 64) - 1

Key = Union[int, str]


def splitmix64(x: int) -> int:
    """One step of the splitmix64 output function.

    Parameters
    ----------
    x : int
        Input state, reduced modulo 2**64.

    Returns
    -------
    int
        Mixed 64-bit value.
    """
    z = (int(x) + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _key_to_int(key: Key) -> int:
    if isinstance(key, str):
        digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little")
    if isinstance(key, (bool, np.bool_)):
        raise TypeError("boolean seed keys are ambiguous")
    return int(key) & MASK64


def derive_seed(master_seed: int, *keys: Key) -> int:
    """Derive a child seed from ``master_seed`` and an ordered key path.

    ``derive_seed(s, t)`` equals ``splitmix64(s ^ t)`` for an integer ``t``,
    which is the per-trial rule; longer paths chain that rule.
    """
    state = int(master_seed) & MASK64
    for key in keys:
        state = splitmix64(state ^ _key_to_int(key))
    return state


def generator(seed: int) -> np.random.Generator:
    """Counter-based Philox generator keyed by a 64-bit seed."""
    return np.random.Generator(np.random.Philox(key=int(seed) & MASK64))
