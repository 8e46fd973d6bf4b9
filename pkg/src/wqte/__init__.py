"""Eigenvalue spectra from the ancilla signal of a controlled-evolution Hadamard test."""

from .acquisition import QSignal, SamplingPlan, acquire_signal, synthesize_noise_signal
from .hamiltonian import (
    Hamiltonian,
    PauliTerm,
    PauliWord,
    add_offset,
    build_heisenberg_1d,
    build_heisenberg_2d,
    parse_hamiltonian,
    spectral_radius_bound,
)
from .oracle import EigenDecomposition, ReferenceState, dense_matrix, diagonalize, exact_q
from .planner import estimate_resources, noise_gate_budget, plan_absolute, plan_relative, trotter_step_for
from .spectral import detect_peaks, determine_signs, dft_amplitudes, evaluate_against_oracle, noise_threshold
from .statevector import GateLog, NoiseModel, TrotterPlan, run_hadamard_test

__all__ = [
    "EigenDecomposition", "GateLog", "Hamiltonian", "NoiseModel", "PauliTerm", "PauliWord",
    "QSignal", "ReferenceState", "SamplingPlan", "TrotterPlan", "acquire_signal", "add_offset",
    "build_heisenberg_1d", "build_heisenberg_2d", "dense_matrix", "detect_peaks",
    "determine_signs", "dft_amplitudes", "diagonalize", "estimate_resources",
    "evaluate_against_oracle", "exact_q", "noise_gate_budget", "noise_threshold",
    "parse_hamiltonian", "plan_absolute", "plan_relative", "run_hadamard_test",
    "spectral_radius_bound", "synthesize_noise_signal", "trotter_step_for",
]
