"""Exact diagonalization oracle: dense matrices, overlaps and the analytic Q(t).

Everything here is a test instrument for small systems (``n_qubits <= 14``);
the simulator in :mod:`wqte.statevector` is the path that scales.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._pauli import word_action
from .hamiltonian import Hamiltonian

MAX_DENSE_QUBITS = 14
DEGENERACY_TOL = 1e-9


class OracleSizeError(ValueError):
    """Raised when a dense operation would exceed the qubit guard."""


def _check_size(n: int):
    if n > MAX_DENSE_QUBITS:
        raise OracleSizeError(f"{n} qubits exceeds the dense guard of {MAX_DENSE_QUBITS}")


@dataclass(frozen=True)
class ReferenceState:
    """Reference state ``|psi_ref>``: a basis bitstring or an explicit vector.

    Use :meth:`basis`, :meth:`neel` or :meth:`explicit` to construct.
    """

    bits: str | None = None
    amplitudes: tuple[complex, ...] | None = None

    def __post_init__(self):
        if (self.bits is None) == (self.amplitudes is None):
            raise ValueError("give exactly one of bits or amplitudes")
        if self.bits is not None:
            if not self.bits or set(self.bits) - {"0", "1"}:
                raise ValueError(f"bad basis bitstring {self.bits!r}")
        else:
            vec = np.asarray(self.amplitudes, dtype=complex)
            dim = vec.size
            if dim < 2 or dim & (dim - 1):
                raise ValueError("explicit state length must be a power of two >= 2")
            if abs(np.linalg.norm(vec) - 1.0) > 1e-12:
                raise ValueError(f"explicit reference not normalized (norm {np.linalg.norm(vec):.15g})")

    @classmethod
    def basis(cls, bits: str) -> "ReferenceState":
        return cls(bits=bits)

    @classmethod
    def neel(cls, n: int) -> "ReferenceState":
        """Alternating pattern ``|0101...>``."""
        return cls(bits="".join("01"[j % 2] for j in range(n)))

    @classmethod
    def explicit(cls, vector) -> "ReferenceState":
        return cls(amplitudes=tuple(complex(a) for a in np.asarray(vector).ravel()))

    @property
    def is_basis(self) -> bool:
        return self.bits is not None

    @property
    def n_qubits(self) -> int:
        if self.bits is not None:
            return len(self.bits)
        return len(self.amplitudes).bit_length() - 1

    def vector(self) -> np.ndarray:
        if self.bits is not None:
            v = np.zeros(1 << len(self.bits), dtype=complex)
            v[int(self.bits, 2)] = 1.0
            return v
        return np.asarray(self.amplitudes, dtype=complex)


@dataclass(frozen=True, eq=False)
class EigenDecomposition:
    """Ascending eigenvalues and the reference-state weights ``|c_i|^2``."""

    energies: np.ndarray
    overlaps: np.ndarray
    n_qubits: int

    def distinct(self, tol: float = DEGENERACY_TOL) -> tuple[np.ndarray, np.ndarray]:
        """Group energies closer than ``tol`` and sum their overlaps.

        The summed weight per distinct eigenvalue is basis independent, which
        is all the signal Q(t) can see.
        """
        if self.energies.size == 0:
            return self.energies.copy(), self.overlaps.copy()
        starts = np.concatenate(([True], np.diff(self.energies) > tol))
        group = np.cumsum(starts) - 1
        weights = np.bincount(group, weights=self.overlaps)
        sums = np.bincount(group, weights=self.energies)
        counts = np.bincount(group)
        return sums / counts, weights


def _dense(H: Hamiltonian, real: bool) -> np.ndarray:
    n = H.n_qubits
    _check_size(n)
    dim = 1 << n
    out = np.zeros((dim, dim), dtype=float if real else complex)
    cols = np.arange(dim)
    for term in H.terms:
        gather, coef = word_action(term.word, n)
        # (P psi)[c] = coef[c] psi[gather[c]]  =>  P[c, gather[c]] = coef[c]
        out[cols, gather] += term.coefficient * (coef.real if real else coef)
    out[cols, cols] += H.identity_offset
    return out


def is_real(H: Hamiltonian) -> bool:
    """True when every word has an even number of Y factors."""
    return all(sum(p == "Y" for _, p in t.word.factors) % 2 == 0 for t in H.terms)


def dense_matrix(H: Hamiltonian) -> np.ndarray:
    """Complex ``2**n x 2**n`` matrix of ``H``."""
    return _dense(H, real=False)


def eigensystem(H: Hamiltonian) -> tuple[np.ndarray, np.ndarray]:
    """``(energies, vectors)`` of ``H``; vectors are real for real ``H``."""
    return np.linalg.eigh(_dense(H, real=is_real(H)))


def diagonalize(H: Hamiltonian, ref: ReferenceState) -> EigenDecomposition:
    """Exact spectrum of ``H`` and overlaps ``|<Psi_i|psi_ref>|^2``."""
    _check_size(H.n_qubits)
    if ref.n_qubits != H.n_qubits:
        raise ValueError(f"reference has {ref.n_qubits} qubits, Hamiltonian {H.n_qubits}")
    energies, vecs = eigensystem(H)
    if ref.is_basis:
        amps = vecs[int(ref.bits, 2), :]
    else:
        amps = vecs.conj().T @ ref.vector()
    overlaps = np.abs(amps) ** 2
    return EigenDecomposition(energies, overlaps, H.n_qubits)


def exact_q(decomp: EigenDecomposition, t):
    """``Q(t) = sum_i |c_i|^2 cos(E_i t)``; ``t`` may be an array."""
    t_arr = np.asarray(t, dtype=float)
    vals = np.cos(np.multiply.outer(t_arr, decomp.energies)) @ decomp.overlaps
    return float(vals) if t_arr.ndim == 0 else vals
