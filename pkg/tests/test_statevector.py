import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_hamiltonian, random_unit_vector
from wqte import statevector as sv
from wqte.hamiltonian import Hamiltonian, PauliWord, build_heisenberg_1d
from wqte.oracle import ReferenceState, dense_matrix, diagonalize, exact_q
from wqte.statevector import (
    GateLog,
    NoiseModel,
    RandomStreams,
    StateVector,
    TrotterPlan,
    ancilla_probabilities,
    apply_ancilla_hadamard,
    apply_pauli_channel,
    controlled_pauli_rotation,
    controlled_trotter_evolution,
    exact_controlled_evolution,
    prepare_reference,
    run_circuit,
    run_hadamard_test,
    sample_ancilla,
)

XXZ2 = build_heisenberg_1d(2, 1, 2)
R01 = ReferenceState.basis("01")


def superposed(n, target=None):
    """Ancilla in |+>, target register in ``target`` (default |0..0>)."""
    state = prepare_reference(n, ReferenceState.explicit(target) if target is not None else ReferenceState.basis("0" * n))
    return apply_ancilla_hadamard(state)


def expm_branch(H, t, vec):
    e, V = np.linalg.eigh(dense_matrix(H))
    return V @ (np.exp(-1j * e * t) * (V.conj().T @ vec))


class TestPreparation:
    def test_basis(self):
        s = prepare_reference(2, R01)
        expected = np.zeros(8)
        expected[1] = 1
        np.testing.assert_array_equal(s.amplitudes, expected)
        assert s.log.prep == 1

    def test_explicit(self):
        s = prepare_reference(1, ReferenceState.explicit([1, 0]))
        np.testing.assert_array_equal(s.amplitudes, [1, 0, 0, 0])
        assert s.log.prep == 1

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            prepare_reference(3, R01)

    def test_gate_count_per_set_bit(self):
        assert prepare_reference(4, ReferenceState.basis("1101")).log.prep == 3


class TestHadamard:
    def test_uniform_superposition(self):
        s = apply_ancilla_hadamard(prepare_reference(2, R01))
        np.testing.assert_allclose(s.branches[:, 1], [2 ** -0.5, 2 ** -0.5])

    def test_involution(self):
        rng = np.random.default_rng(0)
        s = StateVector(random_unit_vector(rng, 16), 3)
        before = s.amplitudes.copy()
        apply_ancilla_hadamard(apply_ancilla_hadamard(s))
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-12)

    def test_minus_state_to_one(self):
        s = StateVector(np.array([1, 0, -1, 0]) / math.sqrt(2), 1)
        apply_ancilla_hadamard(s)
        np.testing.assert_allclose(s.amplitudes, [0, 0, 1, 0], atol=1e-15)


class TestControlledRotation:
    def test_control_off(self):
        s = prepare_reference(2, R01)
        before = s.amplitudes.copy()
        controlled_pauli_rotation(s, PauliWord.parse("X0 Y1"), 0.77)
        np.testing.assert_array_equal(s.amplitudes, before)

    def test_z_rotation_phase(self):
        s = StateVector(np.array([0, 0, 1, 0], dtype=complex), 1)
        controlled_pauli_rotation(s, PauliWord.parse("Z0"), math.pi)
        np.testing.assert_allclose(s.amplitudes, [0, 0, np.exp(-1j * math.pi), 0], atol=1e-15)

    def test_identity_word_is_phase(self):
        s = superposed(1)
        controlled_pauli_rotation(s, PauliWord(), 0.4)
        np.testing.assert_allclose(s.branches[1, 0], np.exp(-0.4j) / math.sqrt(2))
        assert s.log.phases == 1 and s.log.rotations == 0

    def test_out_of_range(self):
        with pytest.raises(IndexError):
            controlled_pauli_rotation(superposed(2), PauliWord.parse("X2"), 0.1)

    def test_matches_matrix_exponential(self):
        rng = np.random.default_rng(2)
        psi = random_unit_vector(rng, 8)
        s = superposed(3, psi)
        word = PauliWord.parse("Y0 X2")
        controlled_pauli_rotation(s, word, 0.3)
        expected = expm_branch(Hamiltonian(3, ((1.0, word),)), 0.3, psi) / math.sqrt(2)
        np.testing.assert_allclose(s.branches[1], expected, atol=1e-12)
        np.testing.assert_array_equal(s.branches[0], psi / math.sqrt(2))


class TestTrotter:
    def test_single_term_is_exact(self):
        H = Hamiltonian(2, ((0.8, "X0 Z1"),), 0.25)
        psi = random_unit_vector(np.random.default_rng(1), 4)
        for tau in (0.07, 0.5, 3.0):
            s = superposed(2, psi)
            controlled_trotter_evolution(s, H, 2.3, TrotterPlan(tau))
            np.testing.assert_allclose(s.branches[1], expm_branch(H, 2.3, psi) / math.sqrt(2), atol=1e-12)

    def test_slice_count_and_gate_log(self):
        H = build_heisenberg_1d(3, 1, 2)  # 6 terms -> 11 rotations per slice
        s = superposed(3)
        controlled_trotter_evolution(s, H, 1.0, TrotterPlan(0.3))
        assert s.log.rotations == 4 * 11
        assert TrotterPlan(0.1).slices_for(0.3) == 3
        assert TrotterPlan(0.1).slices_for(0.0) == 0

    def test_negative_time_is_adjoint(self):
        rng = np.random.default_rng(4)
        H = random_hamiltonian(rng, 3, n_terms=5)
        psi = random_unit_vector(rng, 8)
        plan = TrotterPlan(0.13)
        s = superposed(3, psi)
        before = s.amplitudes.copy()
        controlled_trotter_evolution(s, H, 1.1, plan)
        controlled_trotter_evolution(s, H, -1.1, plan)
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-12)

    def test_second_order_convergence(self):
        rng = np.random.default_rng(9)
        H = random_hamiltonian(rng, 3, n_terms=6)
        psi = random_unit_vector(rng, 8)
        exact = expm_branch(H, 1.0, psi) / math.sqrt(2)
        errs = []
        for tau in (0.1, 0.05):
            s = superposed(3, psi)
            controlled_trotter_evolution(s, H, 1.0, TrotterPlan(tau))
            errs.append(np.linalg.norm(s.branches[1] - exact))
        assert 3.5 < errs[0] / errs[1] < 4.5

    def test_batched_compiled_matches_gate_by_gate(self):
        rng = np.random.default_rng(12)
        H = random_hamiltonian(rng, 3, n_terms=5)
        ref = ReferenceState.explicit(random_unit_vector(rng, 8))
        plan = TrotterPlan(0.2)
        ts = np.array([0.0, 0.2, 0.35, -0.9, 4.1, 60.0])
        batch = run_circuit(H, ref, ts, plan, batch=ts.size)
        for j, t in enumerate(ts):
            single = run_circuit(H, ref, float(t), plan)
            np.testing.assert_allclose(batch.amplitudes[:, j], single.amplitudes, atol=1e-10)

    def test_bad_plan(self):
        with pytest.raises(ValueError):
            TrotterPlan(0.0)
        with pytest.raises(ValueError):
            TrotterPlan(0.1, order=4)


class TestExactEvolution:
    def test_zero_time(self):
        s = superposed(2, random_unit_vector(np.random.default_rng(0), 4))
        before = s.amplitudes.copy()
        exact_controlled_evolution(s, XXZ2, 0.0)
        np.testing.assert_allclose(s.amplitudes, before, atol=1e-14)

    def test_z_phase(self):
        s = StateVector(np.array([0, 0, 1, 0], dtype=complex), 1)
        exact_controlled_evolution(s, Hamiltonian(1, ((1.0, "Z0"),)), 0.9)
        np.testing.assert_allclose(s.amplitudes[2], np.exp(-0.9j))

    def test_offset_phase_included(self):
        s = superposed(1)
        exact_controlled_evolution(s, Hamiltonian(1, (), 0.5), 2.0)
        np.testing.assert_allclose(s.branches[1, 0], np.exp(-1j) / math.sqrt(2))

    def test_agrees_with_trotter(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            H = random_hamiltonian(rng, 3)
            psi = random_unit_vector(rng, 8)
            a, b = superposed(3, psi), superposed(3, psi)
            exact_controlled_evolution(a, H, 0.8)
            controlled_trotter_evolution(b, H, 0.8, TrotterPlan(0.01))
            assert np.linalg.norm(a.amplitudes - b.amplitudes) < 0.8 * 0.01 ** 2 * 50


class TestNoise:
    def test_gamma_zero_is_identity(self):
        s = superposed(2)
        before = s.amplitudes.copy()
        for i in range(50):
            apply_pauli_channel(s, (0, 1, 2), NoiseModel(0.0), np.random.default_rng(i))
        np.testing.assert_array_equal(s.amplitudes, before)

    def test_gamma_one_always_fires(self, monkeypatch):
        hits = []
        monkeypatch.setattr(sv, "_apply_single_pauli", lambda state, q, label: hits.append((q, label)))
        rng = np.random.default_rng(0)
        for _ in range(100):
            apply_pauli_channel(superposed(2), (0, 2), NoiseModel(1.0), rng)
        assert len(hits) == 200
        assert {label for _, label in hits} == {"X", "Y", "Z"}

    def test_insertion_frequency(self, monkeypatch):
        hits = []
        monkeypatch.setattr(sv, "_apply_single_pauli", lambda state, q, label: hits.append(q))
        rng = np.random.default_rng(1)
        state = superposed(1)
        calls = 100_000
        for _ in range(calls):
            apply_pauli_channel(state, (1,), NoiseModel(0.25), rng)
        sigma = math.sqrt(0.25 * 0.75 / calls)
        assert abs(len(hits) / calls - 0.25) < 3 * sigma

    @pytest.mark.parametrize("label", ["X", "Y", "Z"])
    @pytest.mark.parametrize("qubit", [0, 1, 2])
    def test_single_paulis_match_kron(self, qubit, label):
        P = {"X": np.array([[0, 1], [1, 0]]), "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1, -1])}[label]
        ops = [np.eye(2)] * 3
        ops[qubit] = P
        full = np.kron(np.kron(ops[0], ops[1]), ops[2])
        vec = random_unit_vector(np.random.default_rng(qubit), 8)
        s = StateVector(vec.copy(), 2)
        sv._apply_single_pauli(s, qubit, label)
        np.testing.assert_allclose(s.amplitudes, full @ vec, atol=1e-15)

    def test_disabled_model_rejected(self):
        with pytest.raises(ValueError):
            apply_pauli_channel(superposed(1), (0,), NoiseModel(0.1, enabled=False), np.random.default_rng())

    def test_noisy_norm_preserved(self):
        rng = RandomStreams(3)
        state = run_circuit(XXZ2, R01, 1.3, TrotterPlan(0.1), NoiseModel(0.2), rng.generator(0, 0))
        assert abs(state.norm() - 1) < 1e-12

    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            NoiseModel(1.5)


class TestReadout:
    def test_circuit_probabilities(self):
        d = diagonalize(XXZ2, R01)
        for t in (0.0, 0.3, 1.7):
            p0, p1 = ancilla_probabilities(run_circuit(XXZ2, R01, t, "exact"))
            assert abs(p0 + p1 - 1) < 1e-12
            assert abs(p0 - (0.5 + 0.5 * exact_q(d, t))) < 1e-10

    def test_z_half(self):
        p0, _ = ancilla_probabilities(run_circuit(Hamiltonian(1, ((1.0, "Z0"),)), ReferenceState.basis("0"), math.pi / 2, "exact"))
        assert abs(p0 - 0.5) < 1e-12

    def test_sample_certain(self):
        assert sample_ancilla(1.0, 37, np.random.default_rng(0)) == 1.0

    def test_single_shot_values(self):
        rng = np.random.default_rng(1)
        assert {sample_ancilla(0.3, 1, rng) for _ in range(50)} == {-1.0, 1.0}

    def test_binomial_statistics(self):
        rng = np.random.default_rng(2)
        draws = np.array([sample_ancilla(0.9, 100, rng) for _ in range(10_000)])
        assert abs(draws.mean() - 0.8) < 0.002
        assert abs(draws.var() / 0.0036 - 1) < 0.1

    def test_sample_errors(self):
        with pytest.raises(ValueError):
            sample_ancilla(0.5, 0, np.random.default_rng())
        with pytest.raises(ValueError):
            sample_ancilla(1.5, 10, np.random.default_rng())


class TestHadamardTest:
    def test_t_zero(self):
        q, log = run_hadamard_test(build_heisenberg_1d(3, 1, 1), ReferenceState.neel(3), 0.0)
        assert q == pytest.approx(1.0, abs=1e-14)

    def test_fixture_quarter_period(self):
        q, log = run_hadamard_test(XXZ2, R01, math.pi / 4)
        assert abs(q) < 1e-10
        assert log.gate_count == 4 and isinstance(log, GateLog)

    def test_noise_needs_explicit_mode(self):
        with pytest.raises(ValueError, match="trajectory"):
            run_hadamard_test(XXZ2, R01, 0.5, noise=NoiseModel(0.01), rng=1)

    def test_shots_need_rng(self):
        with pytest.raises(ValueError):
            run_hadamard_test(XXZ2, R01, 0.5, shots=10)

    def test_deterministic_streams(self):
        a = run_hadamard_test(XXZ2, R01, 0.5, TrotterPlan(0.1), NoiseModel(0.05), shots=20, rng=RandomStreams(4, 2))
        b = run_hadamard_test(XXZ2, R01, 0.5, TrotterPlan(0.1), NoiseModel(0.05), shots=20, rng=RandomStreams(4, 2))
        assert a[0] == b[0]

    def test_shot_estimate_unbiased(self):
        q, _ = run_hadamard_test(XXZ2, R01, 0.4, shots=200_000, rng=5)
        assert abs(q - (0.5 + 0.5 * math.cos(1.6))) < 4 * math.sqrt(1 / 200_000)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(-30, 30, allow_nan=False))
def test_p0_minus_p1_is_exact_q(seed, t):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 5))
    H = random_hamiltonian(rng, n)
    ref = ReferenceState.explicit(random_unit_vector(rng, 2 ** n))
    q, _ = run_hadamard_test(H, ref, t)
    assert abs(q - exact_q(diagonalize(H, ref), t)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_gates_preserve_norm_and_control_off_block(seed):
    rng = np.random.default_rng(seed)
    H = random_hamiltonian(rng, 3)
    s = superposed(3, random_unit_vector(rng, 8))
    off = s.branches[0].copy()
    for term in H.terms:
        controlled_pauli_rotation(s, term.word, float(rng.normal()))
        assert abs(s.norm() - 1) < 1e-10
    controlled_trotter_evolution(s, H, float(rng.uniform(-3, 3)), TrotterPlan(0.1))
    exact_controlled_evolution(s, H, float(rng.uniform(-3, 3)))
    np.testing.assert_array_equal(s.branches[0], off)
    assert abs(s.norm() - 1) < 1e-10


def test_trotter_error_fits_quadratic_law():
    from wqte.spectral import fit_quadratic

    rng = np.random.default_rng(31)
    taus = np.array([0.2, 0.1, 0.05])
    for _ in range(20):
        H = random_hamiltonian(rng, 3, n_terms=6)
        psi = random_unit_vector(rng, 8)
        exact = expm_branch(H, 1.0, psi) / math.sqrt(2)
        errs = []
        for tau in taus:
            s = superposed(3, psi)
            controlled_trotter_evolution(s, H, 1.0, TrotterPlan(tau))
            errs.append(np.linalg.norm(s.branches[1] - exact))
        assert fit_quadratic(taus, errs).r_squared > 0.99
