"""Pauli-sum Hamiltonians, Heisenberg lattice builders and a plain-text format.

A Hamiltonian is stored as a real-weighted sum of Pauli words plus a real
identity offset::

    H = c_1 P_1 + c_2 P_2 + ... + c_Z P_Z + s_0 I

Qubit ``j`` of a word is the ``j``-th tensor factor from the left, so the
basis state ``|b_0 b_1 ... b_{n-1}>`` has integer index ``int("b_0...b_{n-1}", 2)``.

Text format::

    qubits 2
    # comment
    1.0 X0 X1
    1.0 Y0 Y1
    2.0 Z0 Z1
    -0.5            # identity contribution, folded into the offset
"""

from __future__ import annotations

import io
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, TextIO

PAULI_LABELS = ("X", "Y", "Z")

_FACTOR_RE = re.compile(r"^([XYZ])(\d+)$")


class HamiltonianFormatError(ValueError):
    """Raised for malformed Hamiltonian text or invalid terms."""


@dataclass(frozen=True)
class PauliWord:
    """Tensor product of single-qubit Paulis, identity on absent qubits.

    ``factors`` is a tuple of ``(qubit, label)`` pairs sorted by qubit.
    """

    factors: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        seen = set()
        norm = []
        for q, p in self.factors:
            q = int(q)
            if q < 0:
                raise HamiltonianFormatError(f"negative qubit index {q}")
            if p not in PAULI_LABELS:
                raise HamiltonianFormatError(f"unknown Pauli label {p!r}")
            if q in seen:
                raise HamiltonianFormatError(f"duplicate qubit index {q} in word")
            seen.add(q)
            norm.append((q, p))
        object.__setattr__(self, "factors", tuple(sorted(norm)))

    @classmethod
    def from_mapping(cls, mapping: Mapping[int, str]) -> "PauliWord":
        return cls(tuple(mapping.items()))

    @classmethod
    def parse(cls, text: str) -> "PauliWord":
        """Parse ``"X0 Y3"``; the empty string is the identity word."""
        factors = []
        for tok in text.split():
            m = _FACTOR_RE.match(tok)
            if m is None:
                raise HamiltonianFormatError(f"bad Pauli factor {tok!r}")
            factors.append((int(m.group(2)), m.group(1)))
        return cls(tuple(factors))

    def as_dict(self) -> dict[int, str]:
        return dict(self.factors)

    @property
    def qubits(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.factors)

    @property
    def is_identity(self) -> bool:
        return not self.factors

    @property
    def max_qubit(self) -> int:
        return max(self.qubits, default=-1)

    def __str__(self):
        return " ".join(f"{p}{q}" for q, p in self.factors)


@dataclass(frozen=True)
class PauliTerm:
    coefficient: float
    word: PauliWord

    def __post_init__(self):
        c = self.coefficient
        if isinstance(c, complex):
            if c.imag != 0:
                raise HamiltonianFormatError("complex coefficients are not supported")
            c = c.real
        c = float(c)
        if not math.isfinite(c):
            raise HamiltonianFormatError(f"non-finite coefficient {c}")
        object.__setattr__(self, "coefficient", c)


@dataclass(frozen=True)
class Hamiltonian:
    """Real Pauli-sum Hamiltonian on ``n_qubits`` qubits.

    Terms sharing a word are merged by adding coefficients (first occurrence
    fixes the position); terms whose coefficient is exactly zero are dropped.
    Identity words are folded into ``identity_offset``. The resulting term
    order is the order used by the Trotter expansion.
    """

    n_qubits: int
    terms: tuple[PauliTerm, ...] = ()
    identity_offset: float = 0.0

    def __post_init__(self):
        n = int(self.n_qubits)
        if n < 1:
            raise HamiltonianFormatError("n_qubits must be positive")
        offset = float(self.identity_offset)
        merged: dict[PauliWord, float] = {}
        for term in self.terms:
            if not isinstance(term, PauliTerm):
                coef, word = term
                if not isinstance(word, PauliWord):
                    word = PauliWord.parse(word) if isinstance(word, str) else PauliWord.from_mapping(word)
                term = PauliTerm(coef, word)
            if term.word.max_qubit >= n:
                raise HamiltonianFormatError(
                    f"qubit index {term.word.max_qubit} out of range for {n} qubits")
            if term.word.is_identity:
                offset += term.coefficient
                continue
            merged[term.word] = merged.get(term.word, 0.0) + term.coefficient
        if not math.isfinite(offset):
            raise HamiltonianFormatError("non-finite identity offset")
        terms = tuple(PauliTerm(c, w) for w, c in merged.items() if c != 0.0)
        object.__setattr__(self, "n_qubits", n)
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "identity_offset", offset)

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    def __str__(self):
        return format_hamiltonian(self)


def parse_hamiltonian(text: str | TextIO) -> Hamiltonian:
    """Read the text format into a :class:`Hamiltonian`.

    Raises
    ------
    HamiltonianFormatError
        On a missing/invalid header, unparsable coefficient, bad Pauli token,
        duplicate qubit within a word, out-of-range index or non-finite value.
    """
    if not isinstance(text, str):
        text = text.read()
    n_qubits = None
    terms = []
    offset = 0.0
    for lineno, raw in enumerate(io.StringIO(text), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if n_qubits is None:
            if len(tokens) != 2 or tokens[0] != "qubits":
                raise HamiltonianFormatError(f"line {lineno}: expected 'qubits <n>' header")
            try:
                n_qubits = int(tokens[1])
            except ValueError:
                raise HamiltonianFormatError(f"line {lineno}: bad qubit count {tokens[1]!r}") from None
            if n_qubits < 1:
                raise HamiltonianFormatError(f"line {lineno}: qubit count must be positive")
            continue
        try:
            coef = float(tokens[0])
        except ValueError:
            raise HamiltonianFormatError(f"line {lineno}: bad coefficient {tokens[0]!r}") from None
        if not math.isfinite(coef):
            raise HamiltonianFormatError(f"line {lineno}: non-finite coefficient")
        try:
            word = PauliWord.parse(" ".join(tokens[1:]))
        except HamiltonianFormatError as exc:
            raise HamiltonianFormatError(f"line {lineno}: {exc}") from None
        if word.max_qubit >= n_qubits:
            raise HamiltonianFormatError(
                f"line {lineno}: qubit index {word.max_qubit} >= declared count {n_qubits}")
        if word.is_identity:
            offset += coef
        else:
            terms.append(PauliTerm(coef, word))
    if n_qubits is None:
        raise HamiltonianFormatError("missing 'qubits <n>' header")
    return Hamiltonian(n_qubits, tuple(terms), offset)


def format_hamiltonian(H: Hamiltonian) -> str:
    """Serialize ``H``; ``parse_hamiltonian`` reproduces it exactly."""
    lines = [f"qubits {H.n_qubits}"]
    if H.identity_offset != 0.0:
        lines.append(repr(H.identity_offset))
    for term in H.terms:
        lines.append(f"{term.coefficient!r} {term.word}")
    return "\n".join(lines) + "\n"


def _bond_terms(i: int, j: int, J: float, h: float) -> list[PauliTerm]:
    return [
        PauliTerm(J, PauliWord(((i, "X"), (j, "X")))),
        PauliTerm(J, PauliWord(((i, "Y"), (j, "Y")))),
        PauliTerm(h, PauliWord(((i, "Z"), (j, "Z")))),
    ]


def build_heisenberg_1d(sites: int, J: float, h: float) -> Hamiltonian:
    """Open XXZ chain ``J(XX + YY) + h ZZ`` on each adjacent pair."""
    if sites < 2:
        raise ValueError("a chain needs at least 2 sites")
    terms = []
    for j in range(sites - 1):
        terms += _bond_terms(j, j + 1, J, h)
    return Hamiltonian(sites, tuple(terms))


def lattice_edges(rows: int, cols: int) -> list[tuple[int, int]]:
    """Nearest-neighbour edges of an open ``rows x cols`` grid, row-major sites."""
    edges = []
    for r in range(rows):
        for c in range(cols):
            s = r * cols + c
            if c + 1 < cols:
                edges.append((s, s + 1))
            if r + 1 < rows:
                edges.append((s, s + cols))
    return edges


def build_heisenberg_2d(rows: int, cols: int, J: float, h: float) -> Hamiltonian:
    """Open-boundary rectangular XXZ model with row-major site indexing."""
    if rows < 1 or cols < 1 or rows * cols < 2:
        raise ValueError("a grid needs at least 2 sites")
    terms = []
    for i, j in lattice_edges(rows, cols):
        terms += _bond_terms(i, j, J, h)
    return Hamiltonian(rows * cols, tuple(terms))


def add_offset(H: Hamiltonian, s0: float) -> Hamiltonian:
    """Return ``H + s0 * I``; every eigenvalue moves by exactly ``s0``."""
    return Hamiltonian(H.n_qubits, H.terms, H.identity_offset + float(s0))


def spectral_radius_bound(H: Hamiltonian) -> float:
    """Triangle-inequality bound ``sum |c| + |offset| >= max |E_i|``."""
    return math.fsum(abs(t.coefficient) for t in H.terms) + abs(H.identity_offset)
