"""Acquire the sampled signal q(n) = Q(n*delta) over an evenly spaced time grid.

Only ``n = 0 .. N//2`` is executed. The rest of the sequence is filled by the
mirror rule ``q(N - n) = q(n)``, which holds because Q(t) is even.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .hamiltonian import Hamiltonian
from .oracle import ReferenceState
from .statevector import (
    NoiseModel,
    RandomStreams,
    TrotterPlan,
    ancilla_probabilities,
    run_circuit,
    run_hadamard_test,
    sample_ancilla,
)

DEFAULT_CHUNK = 512


@dataclass(frozen=True)
class SamplingPlan:
    """Time grid and readout budget.

    Parameters
    ----------
    delta : float
        Sampling interval (inverse energy units).
    n_samples : int
        Signal length ``N``; the grid is ``t_n = n * delta`` for ``n < N``.
    shots : int or None
        Measurements per time point; ``None`` means exact probabilities.
    trajectories : int or None
        Noise trajectories per time point (see ``run_hadamard_test``).
    """

    delta: float
    n_samples: int
    shots: int | None = None
    trajectories: int | None = None

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be positive, got {self.delta}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 2:
            raise ValueError(f"n_samples must be an integer >= 2, got {self.n_samples}")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive")
        if self.trajectories is not None and self.trajectories < 1:
            raise ValueError("trajectories must be positive")
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @classmethod
    def from_tmax(cls, t_max: float, delta: float, shots=None, trajectories=None) -> "SamplingPlan":
        """Plan with ``N = round(t_max / delta)`` so that ``N * delta ~= t_max``."""
        return cls(delta, max(2, int(round(t_max / delta))), shots, trajectories)

    @property
    def t_max(self) -> float:
        return self.n_samples * self.delta

    @property
    def resolution(self) -> float:
        """Energy resolution ``2 pi / (N delta)``."""
        return 2 * math.pi / (self.n_samples * self.delta)

    @property
    def n_executed(self) -> int:
        return self.n_samples // 2 + 1

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.delta

    def with_shots(self, shots) -> "SamplingPlan":
        return SamplingPlan(self.delta, self.n_samples, shots, self.trajectories)


@dataclass(eq=False)
class QSignal:
    """Full-length mirrored signal plus the metadata of how it was acquired."""

    values: np.ndarray
    plan: SamplingPlan
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.plan.n_samples,):
            raise ValueError("signal length does not match the sampling plan")

    @property
    def times(self) -> np.ndarray:
        return self.plan.times()

    def is_mirrored(self) -> bool:
        v = self.values
        return bool(np.array_equal(v[1:], v[:0:-1]))


def mirror(half: np.ndarray, n_samples: int) -> np.ndarray:
    """Extend ``q(0..N//2)`` to length ``N`` with ``q(N-n) = q(n)``."""
    half = np.asarray(half, dtype=float)
    if half.shape != (n_samples // 2 + 1,):
        raise ValueError("need exactly N//2 + 1 executed values")
    full = np.empty(n_samples)
    full[: half.size] = half
    full[half.size:] = half[1: n_samples - half.size + 1][::-1]
    return full


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy % (1 << 63))


def _backend_meta(backend) -> dict:
    if isinstance(backend, TrotterPlan):
        return {"backend": "trotter", "tau": backend.tau}
    return {"backend": "exact", "tau": None}


def acquire_signal(H: Hamiltonian, ref: ReferenceState, plan: SamplingPlan, backend="exact",
                   noise: NoiseModel | None = None, seed: int | None = None,
                   chunk: int = DEFAULT_CHUNK) -> QSignal:
    """Run the circuit at ``t = n * delta`` for ``n = 0 .. N//2`` and mirror.

    Noiseless runs evolve ``chunk`` time points at once as batch columns of one
    state. Noisy runs execute every shot or trajectory separately. Randomness
    for time point ``n`` comes from the stream ``(seed, n, ...)``, so the
    result does not depend on chunking or execution order.

    If randomness is needed and ``seed`` is None, a seed is drawn and recorded
    in ``meta["seed"]``.
    """
    if ref.n_qubits != H.n_qubits:
        raise ValueError(f"reference has {ref.n_qubits} qubits, Hamiltonian {H.n_qubits}")
    noisy = noise is not None and noise.active
    needs_rng = noisy or plan.shots is not None
    if needs_rng and seed is None:
        seed = _fresh_seed()
    streams = RandomStreams(seed) if needs_rng else None
    times = np.arange(plan.n_executed) * plan.delta
    half = np.empty(plan.n_executed)
    log = None

    if noisy:
        for n, t in enumerate(times):
            half[n], log = run_hadamard_test(H, ref, float(t), backend, noise, plan.shots,
                                             plan.trajectories, streams.at(n))
    else:
        for start in range(0, times.size, chunk):
            ts = times[start:start + chunk]
            state = run_circuit(H, ref, ts, backend, batch=ts.size)
            p0, p1 = ancilla_probabilities(state)
            log = state.log
            if plan.shots is None:
                half[start:start + ts.size] = p0 - p1
                continue
            reps = plan.trajectories or 1
            for i, prob in enumerate(p0):
                st = streams.at(start + i)
                draws = [sample_ancilla(float(prob), plan.shots, st.generator(j, RandomStreams.READOUT))
                         for j in range(reps)]
                half[start + i] = draws[0] if reps == 1 else float(np.mean(draws))

    meta = {
        **_backend_meta(backend),
        "gamma": noise.gamma if noisy else 0.0,
        "shots": plan.shots,
        "trajectories": plan.trajectories,
        "seed": seed,
        "gate_count": log.gate_count if log is not None else 0,
        "gate_log": log.as_dict() if log is not None else {},
    }
    return QSignal(mirror(half, plan.n_samples), plan, meta)


def synthesize_noise_signal(plan: SamplingPlan, M: int, seed: int) -> QSignal:
    """Pure shot-noise signal: every executed point samples ``P0 = 1/2`` with ``M`` shots."""
    if M < 1:
        raise ValueError("need at least one shot")
    streams = RandomStreams(seed)
    half = np.array([sample_ancilla(0.5, M, streams.at(n).generator(0, RandomStreams.READOUT))
                     for n in range(plan.n_executed)])
    meta = {"backend": "noise", "tau": None, "gamma": 0.0, "shots": M,
            "trajectories": None, "seed": seed, "gate_count": 0, "gate_log": {}}
    return QSignal(mirror(half, plan.n_samples), plan.with_shots(M), meta)


def format_signal_csv(signal: QSignal) -> str:
    """Serialize as ``# key=<json>`` metadata lines then ``n,t,q`` rows."""
    buf = io.StringIO()
    plan = signal.plan
    header = {"delta": plan.delta, "n_samples": plan.n_samples, **signal.meta,
              "shots": plan.shots, "trajectories": plan.trajectories}
    for key, value in header.items():
        buf.write(f"# {key}={json.dumps(value, sort_keys=True)}\n")
    buf.write("n,t,q\n")
    for n, (t, q) in enumerate(zip(signal.times, signal.values)):
        buf.write(f"{n},{float(t)!r},{float(q)!r}\n")
    return buf.getvalue()


def write_signal_csv(signal: QSignal, path) -> None:
    Path(path).write_text(format_signal_csv(signal))


def read_signal_csv(path) -> QSignal:
    meta = {}
    values = []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            key, _, raw = line[1:].strip().partition("=")
            meta[key] = json.loads(raw)
        elif line and not line.startswith("n,"):
            values.append(float(line.split(",")[2]))
    plan = SamplingPlan(meta.pop("delta"), meta.pop("n_samples"),
                        meta.get("shots"), meta.get("trajectories"))
    return QSignal(np.array(values), plan, meta)
