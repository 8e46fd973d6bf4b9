"""Statevector simulation of the single-ancilla controlled-evolution circuit.

Register layout: qubit 0 is the ancilla and is the most significant bit, so
``amplitudes.reshape(2, 2**n)`` splits the state into the ancilla=|0> and
ancilla=|1> branches. Target qubit ``j`` of a Pauli word is circuit qubit
``j + 1``.

A state may carry a trailing batch axis (one column per independent circuit,
e.g. one per sample time). Batched states cannot carry noise.

Controlled rotations are applied as block operations on the ancilla=|1>
branch. One such block, an ancilla Hadamard, a reference-prep gate or an
ancilla phase shift each count as one gate for ``N_G``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields
from functools import lru_cache

import numpy as np
import scipy.linalg

from ._pauli import apply_word
from .hamiltonian import Hamiltonian, PauliWord
from .oracle import MAX_DENSE_QUBITS, OracleSizeError, ReferenceState, eigensystem

_SQRT1_2 = 1.0 / math.sqrt(2.0)
_SLICE_TOL = 1e-9
# gate-by-gate below this many rotations, compiled slice above
_COMPILE_ROTATIONS = 4096


@dataclass(frozen=True)
class TrotterPlan:
    """Second-order Trotter schedule with step ``tau``."""

    tau: float
    order: int = 2

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"Trotter step must be positive, got {self.tau}")
        if self.order != 2:
            raise ValueError("only the second-order decomposition is supported")

    def slices_for(self, t):
        """``ceil(|t| / tau)``, treating near-integer ratios as exact."""
        ratio = np.abs(np.asarray(t, dtype=float)) / self.tau
        k = np.ceil(ratio - _SLICE_TOL).astype(np.int64)
        k = np.maximum(k, 0)
        return int(k) if k.ndim == 0 else k


@dataclass(frozen=True)
class NoiseModel:
    """Per-qubit Pauli channel: X, Y or Z each with probability ``gamma / 3``."""

    gamma: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")

    @property
    def active(self) -> bool:
        return self.enabled and self.gamma > 0.0

    def attenuation(self, gate_count: int) -> float:
        """Probability ``(1 - gamma)^N_G`` that no gate draws an error."""
        return (1.0 - self.gamma) ** gate_count


@dataclass
class GateLog:
    hadamards: int = 0
    prep: int = 0
    rotations: int = 0
    phases: int = 0
    exact_blocks: int = 0

    @property
    def gate_count(self) -> int:
        return self.hadamards + self.prep + self.rotations + self.phases + self.exact_blocks

    def as_dict(self) -> dict:
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["gate_count"] = self.gate_count
        return d


class RandomStreams:
    """Counter-based random streams keyed by ``(seed, time index, shot, purpose)``.

    Every stream is an independent Philox generator, so results do not depend
    on the order in which circuits are executed.
    """

    NOISE = 0
    READOUT = 1

    def __init__(self, seed: int, time_index: int = 0):
        if seed < 0 or time_index < 0:
            raise ValueError("seed and time index must be non-negative")
        self.seed = int(seed)
        self.time_index = int(time_index)

    def at(self, time_index: int) -> "RandomStreams":
        return RandomStreams(self.seed, time_index)

    def generator(self, shot: int = 0, purpose: int = READOUT) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, self.time_index, shot, purpose])
        return np.random.Generator(np.random.Philox(ss))


class StateVector:
    """Amplitudes of ancilla + ``n_targets`` qubits, mutated in place by gates."""

    def __init__(self, amplitudes: np.ndarray, n_targets: int, log: GateLog | None = None):
        amplitudes = np.ascontiguousarray(amplitudes, dtype=complex)
        if amplitudes.shape[0] != 1 << (n_targets + 1) or amplitudes.ndim > 2:
            raise ValueError("amplitude array does not match the register size")
        self.amplitudes = amplitudes
        self.n_targets = n_targets
        self.log = log if log is not None else GateLog()
        self.noise: NoiseModel | None = None
        self.rng: np.random.Generator | None = None

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.amplitudes.shape[1:]

    @property
    def branches(self) -> np.ndarray:
        """View of shape ``(2, 2**n, *batch)``; writes go to ``amplitudes``."""
        return self.amplitudes.reshape((2, 1 << self.n_targets) + self.batch_shape)

    def norm(self):
        return np.sqrt(np.sum(np.abs(self.amplitudes) ** 2, axis=0))

    def copy(self) -> "StateVector":
        out = StateVector(self.amplitudes.copy(), self.n_targets,
                          GateLog(**{f.name: getattr(self.log, f.name) for f in fields(GateLog)}))
        out.noise, out.rng = self.noise, self.rng
        return out

    def attach_noise(self, noise: NoiseModel, rng: np.random.Generator) -> "StateVector":
        if self.batch_shape:
            raise ValueError("noise trajectories need an unbatched state")
        self.noise, self.rng = noise, rng
        return self


def _after_gate(state: StateVector, support):
    if state.noise is not None and state.noise.active:
        apply_pauli_channel(state, support, state.noise, state.rng)


def prepare_reference(n_targets: int, ref: ReferenceState, batch: int | None = None,
                      noise: NoiseModel | None = None, rng=None) -> StateVector:
    """Ancilla in |0>, target register in ``ref``.

    Logs one X gate per set bit for a basis reference, one composite gate for
    an explicit vector.
    """
    if ref.n_qubits != n_targets:
        raise ValueError(f"reference has {ref.n_qubits} qubits, register has {n_targets}")
    dim = 1 << n_targets
    shape = (2 * dim,) if batch is None else (2 * dim, batch)
    state = StateVector(np.zeros(shape, dtype=complex), n_targets)
    if noise is not None:
        state.attach_noise(noise, rng)
    br = state.branches
    if ref.is_basis:
        br[0, 0] = 1.0
        for j, bit in enumerate(ref.bits):
            if bit == "1":
                for b in (0, 1):
                    br[b] = apply_word(PauliWord(((j, "X"),)), n_targets, br[b])
                state.log.prep += 1
                _after_gate(state, (j + 1,))
    else:
        vec = ref.vector()
        br[0] = vec if batch is None else vec[:, None]
        state.log.prep += 1
        _after_gate(state, tuple(range(1, n_targets + 1)))
    return state


def apply_ancilla_hadamard(state: StateVector) -> StateVector:
    br = state.branches
    a0 = br[0].copy()
    br[0] += br[1]
    br[0] *= _SQRT1_2
    a0 -= br[1]
    a0 *= _SQRT1_2
    br[1] = a0
    state.log.hadamards += 1
    _after_gate(state, (0,))
    return state


def _rotate_branch(branch: np.ndarray, word: PauliWord, n: int, angle) -> np.ndarray:
    """``exp(-i angle P) = cos(angle) - i sin(angle) P``; ``angle`` may be per column."""
    if word.is_identity:
        return branch * np.exp(-1j * np.asarray(angle))
    c, s = np.cos(angle), np.sin(angle)
    return c * branch - 1j * s * apply_word(word, n, branch)


def controlled_pauli_rotation(state: StateVector, word: PauliWord, angle) -> StateVector:
    """Multiply the ancilla=|1> branch by ``exp(-i angle P_word)``.

    The identity word gives the ancilla phase shift ``exp(-i angle)``.
    """
    if word.max_qubit >= state.n_targets:
        raise IndexError(f"word {word} acts outside {state.n_targets} target qubits")
    br = state.branches
    br[1] = _rotate_branch(br[1], word, state.n_targets, angle)
    if word.is_identity:
        state.log.phases += 1
        _after_gate(state, (0,))
    else:
        state.log.rotations += 1
        _after_gate(state, (0,) + tuple(q + 1 for q in word.qubits))
    return state


def slice_sequence(H: Hamiltonian) -> list[tuple[PauliWord, float]]:
    """Palindromic second-order product as ``(word, coefficient * weight)`` pairs.

    ``h_1/2 ... h_{Z-1}/2  h_Z  h_{Z-1}/2 ... h_1/2``; a slice of duration
    ``s`` rotates by ``angle = value * s``.
    """
    terms = H.terms
    if not terms:
        return []
    head = [(t.word, 0.5 * t.coefficient) for t in terms[:-1]]
    return head + [(terms[-1].word, terms[-1].coefficient)] + head[::-1]


def _slice_durations(t, plan: TrotterPlan):
    k = plan.slices_for(t)
    r = np.abs(np.asarray(t, dtype=float)) - (np.asarray(k) - 1) * plan.tau
    r = np.where(np.asarray(k) > 0, r, 0.0)
    return k, r


def _apply_slice(branch: np.ndarray, seq, n: int, duration) -> np.ndarray:
    for word, value in seq:
        branch = _rotate_branch(branch, word, n, value * duration)
    return branch


class CompiledSlice:
    """Dense one-slice unitary ``W(tau)`` and its eigendecomposition.

    ``W`` is built by pushing the identity through the same rotation kernel
    used gate by gate; powers ``W^k`` then cost two matrix products.
    """

    def __init__(self, H: Hamiltonian, tau: float):
        n = H.n_qubits
        if n > MAX_DENSE_QUBITS:
            raise OracleSizeError("slice compilation exceeds the dense guard")
        self.n = n
        self.tau = tau
        self.seq = slice_sequence(H)
        W = _apply_slice(np.eye(1 << n, dtype=complex), self.seq, n, tau)
        T, Z = scipy.linalg.schur(W, output="complex")
        lam = np.diag(T).copy()
        off = np.abs(T - np.diag(lam)).max() if T.size else 0.0
        if off > 1e-8:
            raise np.linalg.LinAlgError(f"slice unitary not diagonalized (off-diagonal {off:.2e})")
        self.phase = np.angle(lam)
        self.vectors = Z

    def power(self, branch: np.ndarray, exponent) -> np.ndarray:
        """``W^exponent @ branch``; ``exponent`` may hold one integer per column."""
        e = np.asarray(exponent, dtype=float)
        y = self.vectors.conj().T @ branch
        y *= np.exp(1j * np.multiply.outer(self.phase, e))
        return self.vectors @ y


@lru_cache(maxsize=8)
def compiled_slice(H: Hamiltonian, tau: float) -> CompiledSlice:
    return CompiledSlice(H, tau)


def controlled_trotter_evolution(state: StateVector, H: Hamiltonian, t, plan: TrotterPlan) -> StateVector:
    """Controlled second-order Trotter evolution for time ``t`` on the |1> branch.

    Positive ``t`` applies ``ceil(t/tau)`` palindromic slices, the last one of
    residual duration so the total is exactly ``t``. Negative ``t`` applies the
    exact adjoint of the ``|t|`` circuit (residual slice first), so evolving by
    ``t`` then ``-t`` is the identity. ``t`` may hold one time per batch column.
    The identity offset is a single controlled phase.
    """
    if not isinstance(plan, TrotterPlan):
        raise TypeError("plan must be a TrotterPlan")
    n = state.n_targets
    if H.n_qubits != n:
        raise ValueError("Hamiltonian and register sizes differ")
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim and t_arr.shape != state.batch_shape:
        raise ValueError("per-column times must match the batch shape")
    seq = slice_sequence(H)
    k, r = _slice_durations(t_arr, plan)
    k_max = int(np.max(k)) if np.size(k) else 0
    n_rot = k_max * len(seq)
    br = state.branches
    noisy = state.noise is not None and state.noise.active

    if noisy or (t_arr.ndim == 0 and n_rot <= _COMPILE_ROTATIONS) or not seq:
        if t_arr.ndim:
            raise ValueError("gate-by-gate evolution needs a scalar time")
        sign = 1.0 if t_arr >= 0 else -1.0
        durations = [plan.tau] * (k - 1) + [float(r)] if k else []
        if sign < 0:
            durations = durations[::-1]
        for d in durations:
            for word, value in seq:
                controlled_pauli_rotation(state, word, sign * value * d)
    else:
        comp = compiled_slice(H, plan.tau)
        branch = br[1]
        neg = t_arr < 0
        first = np.where(neg, -r, 0.0)
        if np.any(first):
            branch = _apply_slice(branch, seq, n, first)
        exponent = np.where(neg, -1, 1) * np.maximum(np.asarray(k) - 1, 0)
        branch = comp.power(branch, exponent)
        last = np.where(neg, 0.0, r)
        if np.any(last):
            branch = _apply_slice(branch, seq, n, last)
        br[1] = branch
        state.log.rotations += n_rot
    if H.identity_offset != 0.0:
        controlled_pauli_rotation(state, PauliWord(), H.identity_offset * t_arr)
    return state


@lru_cache(maxsize=4)
def _eigensystem(H: Hamiltonian):
    return eigensystem(H)


def _matmul(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    if np.isrealobj(A):
        re = np.ascontiguousarray(X.real)
        im = np.ascontiguousarray(X.imag)
        return (A @ re) + 1j * (A @ im)
    return A @ X


def exact_controlled_evolution(state: StateVector, H: Hamiltonian, t) -> StateVector:
    """Multiply the |1> branch by ``exp(-iHt)`` via the eigendecomposition of ``H``."""
    n = state.n_targets
    if n > MAX_DENSE_QUBITS:
        raise OracleSizeError(f"{n} target qubits exceeds the dense guard")
    if H.n_qubits != n:
        raise ValueError("Hamiltonian and register sizes differ")
    t_arr = np.asarray(t, dtype=float)
    if t_arr.ndim and t_arr.shape != state.batch_shape:
        raise ValueError("per-column times must match the batch shape")
    energies, vecs = _eigensystem(H)
    br = state.branches
    y = _matmul(vecs.conj().T, br[1])
    y *= np.exp(-1j * np.multiply.outer(energies, t_arr))
    br[1] = _matmul(vecs, y)
    state.log.exact_blocks += 1
    _after_gate(state, tuple(range(n + 1)))
    return state


def _apply_single_pauli(state: StateVector, qubit: int, label: str):
    br = state.branches
    if qubit == 0:
        if label == "X":
            br[[0, 1]] = br[[1, 0]]
        elif label == "Z":
            br[1] *= -1
        else:  # Y|0> = i|1>, Y|1> = -i|0>
            a0 = br[0].copy()
            br[0] = -1j * br[1]
            br[1] = 1j * a0
    else:
        word = PauliWord(((qubit - 1, label),))
        for b in (0, 1):
            br[b] = apply_word(word, state.n_targets, br[b])


def apply_pauli_channel(state: StateVector, support, noise: NoiseModel, rng: np.random.Generator) -> StateVector:
    """One stochastic trajectory step of the Pauli channel on each qubit of ``support``.

    Qubit 0 is the ancilla. Each qubit independently gets X, Y or Z with
    probability ``gamma / 3`` each.
    """
    if not noise.enabled:
        raise ValueError("noise model is disabled")
    if state.batch_shape:
        raise ValueError("noise trajectories need an unbatched state")
    for q in support:
        if rng.random() < noise.gamma:
            _apply_single_pauli(state, q, "XYZ"[rng.integers(3)])
    return state


def ancilla_probabilities(state: StateVector):
    """``(P0, P1)``: squared norms of the two ancilla branches."""
    p = np.sum(np.abs(state.branches) ** 2, axis=1)
    if p.ndim == 1:
        return float(p[0]), float(p[1])
    return p[0], p[1]


def sample_ancilla(P0: float, M: int, rng: np.random.Generator) -> float:
    """Estimate ``P0 - P1`` from ``M`` ancilla measurements."""
    if M < 1:
        raise ValueError("need at least one shot")
    if not -1e-9 <= P0 <= 1 + 1e-9:
        raise ValueError(f"P0 = {P0} is not a probability")
    m0 = rng.binomial(M, min(max(P0, 0.0), 1.0))
    return (2 * m0 - M) / M


def evolve(state: StateVector, H: Hamiltonian, t, backend) -> StateVector:
    """Dispatch to the exact or Trotter controlled evolution."""
    if backend == "exact":
        return exact_controlled_evolution(state, H, t)
    if isinstance(backend, TrotterPlan):
        return controlled_trotter_evolution(state, H, t, backend)
    raise ValueError(f"unknown backend {backend!r}")


def run_circuit(H: Hamiltonian, ref: ReferenceState, t, backend, noise=None, rng=None,
                batch: int | None = None) -> StateVector:
    """Reference prep, Hadamard, controlled evolution, Hadamard; returns the final state."""
    state = prepare_reference(H.n_qubits, ref, batch=batch, noise=noise, rng=rng)
    apply_ancilla_hadamard(state)
    evolve(state, H, t, backend)
    apply_ancilla_hadamard(state)
    return state


def run_hadamard_test(H: Hamiltonian, ref: ReferenceState, t: float, backend="exact",
                      noise: NoiseModel | None = None, shots: int | None = None,
                      trajectories: int | None = None, rng: RandomStreams | int | None = None):
    """Estimate ``Q(t) = P0 - P1`` for one evolution time.

    Modes
    -----
    ``shots=None, trajectories=None``
        Exact probabilities (noiseless only).
    ``shots=M``
        ``M`` single-shot measurements; with noise each shot runs its own
        noise trajectory.
    ``trajectories=T``
        Average over ``T`` noise trajectories, each read out exactly
        (``shots=None``) or with ``shots`` measurements.

    Returns
    -------
    (q, GateLog)
    """
    noisy = noise is not None and noise.active
    if noisy and shots is None and trajectories is None:
        raise ValueError("noisy runs need shots or an explicit trajectory count")
    if trajectories is not None and trajectories < 1:
        raise ValueError("trajectory count must be positive")
    if shots is not None and shots < 1:
        raise ValueError("need at least one shot")
    if isinstance(rng, (int, np.integer)):
        rng = RandomStreams(int(rng))
    if rng is None and (noisy or shots is not None):
        raise ValueError("sampled or noisy runs need a RandomStreams source")

    if not noisy:
        state = run_circuit(H, ref, t, backend)
        p0, p1 = ancilla_probabilities(state)
        if trajectories is None and shots is None:
            return p0 - p1, state.log
        reps = trajectories or 1
        if shots is None:
            return p0 - p1, state.log
        vals = [sample_ancilla(p0, shots, rng.generator(j, RandomStreams.READOUT)) for j in range(reps)]
        return float(np.mean(vals)), state.log

    if trajectories is None:
        outcomes = 0
        log = None
        for i in range(shots):
            state = run_circuit(H, ref, t, backend, noise, rng.generator(i, RandomStreams.NOISE))
            p0, _ = ancilla_probabilities(state)
            outcomes += sample_ancilla(p0, 1, rng.generator(i, RandomStreams.READOUT))
            log = state.log
        return outcomes / shots, log

    vals = []
    log = None
    for j in range(trajectories):
        state = run_circuit(H, ref, t, backend, noise, rng.generator(j, RandomStreams.NOISE))
        p0, p1 = ancilla_probabilities(state)
        if shots is None:
            vals.append(p0 - p1)
        else:
            vals.append(sample_ancilla(p0, shots, rng.generator(j, RandomStreams.READOUT)))
        log = state.log
    return float(np.mean(vals)), log
