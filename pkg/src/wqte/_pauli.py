"""Bit-mask action of Pauli words on computational basis states."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .hamiltonian import PauliWord


def word_masks(word: PauliWord, n: int) -> tuple[int, int, int]:
    """Return ``(x_mask, z_mask, n_y)`` with qubit ``j`` at bit ``n-1-j``.

    Uses ``Y = i X Z`` so that ``P|b> = i^n_y (-1)^popcount(b & z) |b ^ x>``.
    """
    x = z = ny = 0
    for q, p in word.factors:
        bit = 1 << (n - 1 - q)
        if p in "XY":
            x |= bit
        if p in "ZY":
            z |= bit
        if p == "Y":
            ny += 1
    return x, z, ny


def _parity(values: np.ndarray) -> np.ndarray:
    v = values.copy()
    shift = 1
    while shift < 64:
        v ^= v >> shift
        shift <<= 1
    return v & 1


@lru_cache(maxsize=4096)
def word_action(word: PauliWord, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gather form of ``P``: ``(P psi)[c] = coef[c] * psi[gather[c]]``."""
    x, z, ny = word_masks(word, n)
    idx = np.arange(1 << n, dtype=np.int64)
    gather = idx ^ x
    signs = 1.0 - 2.0 * _parity(gather & z)
    coef = (1j ** ny) * signs
    if ny % 2 == 0:
        coef = coef.real
    gather.flags.writeable = False
    coef.flags.writeable = False
    return gather, coef


def apply_word(word: PauliWord, n: int, psi: np.ndarray) -> np.ndarray:
    """Apply ``P`` to ``psi`` whose first axis is the ``2**n`` register axis."""
    gather, coef = word_action(word, n)
    out = psi[gather]
    if psi.ndim > 1:
        return out * coef.reshape((-1,) + (1,) * (psi.ndim - 1))
    return out * coef
