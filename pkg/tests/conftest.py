import numpy as np
import pytest

from wqte.hamiltonian import Hamiltonian, PauliTerm, PauliWord

CRITERIA: dict[int, str] = {}


def random_hamiltonian(rng: np.random.Generator, n: int, n_terms: int = 6, offset: bool = True) -> Hamiltonian:
    terms = []
    for _ in range(n_terms):
        labels = rng.choice(["I", "X", "Y", "Z"], size=n)
        word = PauliWord(tuple((q, str(p)) for q, p in enumerate(labels) if p != "I"))
        terms.append(PauliTerm(float(rng.normal()), word))
    return Hamiltonian(n, tuple(terms), float(rng.normal()) if offset else 0.0)


def random_unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


@pytest.fixture
def criteria():
    """Record one summary line per acceptance criterion."""
    return CRITERIA


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[number])
