import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from telecnot.qstate import (
    H,
    MAX_QUBITS,
    BellKind,
    DensityMatrix,
    PauliString,
    QubitState,
    RegisterSizeError,
    ZeroProbabilityError,
    apply_gate,
    apply_matrix,
    basis_state,
    bell_decompose,
    bell_state,
    cnot_matrix,
    expectation,
    fidelity_pure,
    overlap,
    partial_trace,
    project_bell,
    random_density_matrix,
    random_state,
    same_up_to_phase,
    tensor,
)

from conftest import qubit_states


def _brute_apply(amps, mat, targets, n):
    """Index-by-index application of a k-qubit matrix; independent of the reshaping path."""
    out = np.zeros_like(amps)
    k = len(targets)
    for idx in range(2**n):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        col = int("".join(str(bits[t]) for t in targets), 2)
        for row in range(2**k):
            new = list(bits)
            for j, t in enumerate(targets):
                new[t] = (row >> (k - 1 - j)) & 1
            out[int("".join(map(str, new)), 2)] += mat[row, col] * amps[idx]
    return out


class TestConstruction:
    def test_basis_product(self):
        s = tensor(QubitState.from_label("H"), QubitState.from_label("H"))
        assert s.amps[0] == 1 and np.count_nonzero(s.amps) == 1

    def test_two_phi_plus_pairs(self):
        s = tensor(bell_state(BellKind.PHI_PLUS), bell_state(BellKind.PHI_PLUS))
        want = np.zeros(16)
        want[[0b0000, 0b0011, 0b1100, 0b1111]] = 0.5
        np.testing.assert_allclose(s.amps, want, atol=1e-15)

    def test_register_cap(self):
        with pytest.raises(RegisterSizeError):
            tensor(random_state(5, np.random.default_rng(0)), random_state(4, np.random.default_rng(1)))
        assert MAX_QUBITS == 8

    def test_zero_vector_rejected(self):
        with pytest.raises(ZeroProbabilityError):
            QubitState.from_amplitudes([0, 0])

    def test_bad_label(self):
        with pytest.raises(ValueError):
            QubitState.from_label("HQ")

    def test_amplitudes_are_read_only(self):
        s = QubitState.from_label("HV")
        with pytest.raises(ValueError):
            s.amps[0] = 1

    @given(qubit_states(2), qubit_states(1))
    def test_tensor_norm_multiplicative(self, a, b):
        assert abs(tensor(a, b).norm() - 1) < 1e-12


class TestGates:
    def test_cnot_logic_table(self):
        # qubit 0 is the target, qubit 1 the control
        u = cnot_matrix(2, control=1, target=0)
        for t, c in itertools.product((0, 1), repeat=2):
            out = QubitState(2, u @ basis_state([t, c]).amps)
            assert same_up_to_phase(out, basis_state([t ^ c, c]))

    def test_vv_goes_to_hv(self):
        out = apply_gate(QubitState.from_label("VV"), "CNOT", (1, 0))
        assert same_up_to_phase(out, QubitState.from_label("HV"))

    def test_hh_fixed(self):
        out = apply_gate(QubitState.from_label("HH"), "CNOT", (1, 0))
        assert same_up_to_phase(out, QubitState.from_label("HH"))

    def test_hadamard_involution(self):
        np.testing.assert_allclose(H @ H, np.eye(2), atol=1e-12)

    def test_unknown_gate(self):
        with pytest.raises(ValueError):
            apply_gate(QubitState.from_label("H"), "T", 0)

    def test_wrong_arity(self):
        with pytest.raises(ValueError):
            apply_gate(QubitState.from_label("HH"), "CNOT", (0,))

    @settings(max_examples=40)
    @given(qubit_states(3))
    def test_apply_matrix_matches_brute_force(self, s):
        u = cnot_matrix(2, 0, 1)
        for targets in [(0, 2), (2, 0), (1, 2)]:
            got = apply_matrix(s, u, targets).amps
            np.testing.assert_allclose(got, _brute_apply(s.amps, u, targets, 3), atol=1e-12)

    @given(qubit_states(3))
    def test_gates_preserve_norm_and_invert(self, s):
        for gate, tg in [("H", 1), ("X", 2), ("Y", 0), ("CNOT", (2, 0))]:
            out = apply_gate(s, gate, tg)
            assert abs(out.norm() - 1) < 1e-12
            back = apply_gate(out, gate, tg)
            assert abs(abs(overlap(back, s)) - 1) < 1e-12


class TestBell:
    def test_amplitudes(self):
        r = 1 / np.sqrt(2)
        np.testing.assert_allclose(bell_state(BellKind.PHI_PLUS).amps, [r, 0, 0, r])
        np.testing.assert_allclose(bell_state(BellKind.PSI_MINUS).amps, [0, r, -r, 0])
        assert abs(overlap(bell_state(BellKind.PHI_PLUS), bell_state(BellKind.PHI_MINUS))) < 1e-15

    def test_parse(self):
        assert BellKind.parse("Phi+") is BellKind.PHI_PLUS
        assert BellKind.parse("PSI_MINUS") is BellKind.PSI_MINUS

    def test_projection_of_pair_times_h(self):
        s = tensor(bell_state(BellKind.PHI_PLUS), QubitState.from_label("H"))
        prob, rem = project_bell(s, (0, 1), BellKind.PHI_PLUS)
        assert abs(prob - 1) < 1e-12
        assert same_up_to_phase(rem, QubitState.from_label("H"))

    def test_projection_of_hhh(self):
        # brute force: <Phi+|_01 |HHH> = (1/sqrt2)|H>, probability 1/2
        s = QubitState.from_label("HHH")
        prob, rem = project_bell(s, (0, 1), BellKind.PHI_PLUS)
        assert abs(prob - 0.5) < 1e-12
        assert same_up_to_phase(rem, QubitState.from_label("H"))

    def test_zero_outcome(self):
        prob, rem = project_bell(QubitState.from_label("HHH"), (0, 1), BellKind.PSI_PLUS)
        assert prob == 0.0 and rem is None

    def test_same_qubit_twice(self):
        with pytest.raises(ValueError):
            project_bell(QubitState.from_label("HH"), (0, 0), BellKind.PHI_PLUS)

    def test_gram_matrix(self):
        basis = np.array([bell_state(k).amps for k in BellKind])
        np.testing.assert_allclose(basis.conj() @ basis.T, np.eye(4), atol=1e-12)

    @given(qubit_states(4))
    def test_outcomes_sum_to_partial_trace(self, s):
        acc = np.zeros((4, 4), dtype=complex)
        for _, p, rem in bell_decompose(s, (1, 3)):
            if rem is not None:
                acc += p * np.outer(rem.amps, rem.amps.conj())
        want = partial_trace(DensityMatrix.from_state(s), [0, 2]).mat
        np.testing.assert_allclose(acc, want, rtol=0, atol=1e-10)

    @given(qubit_states(4))
    def test_completeness(self, s):
        probs = [p for _, p, _ in bell_decompose(s, (3, 1))]
        assert abs(sum(probs) - 1) < 1e-12

    @given(qubit_states(3))
    def test_remainders_reassemble_state(self, s):
        # sum_k |Bell_k>_{01} (x) sqrt(p_k) |rem_k> reproduces the input; outcomes
        # under the 1e-14 probability floor are dropped, so allow 4 * 1e-7
        acc = np.zeros(8, dtype=complex)
        for kind, p, rem in bell_decompose(s, (0, 1)):
            if rem is not None:
                acc += np.sqrt(p) * np.kron(bell_state(kind).amps, rem.amps)
        np.testing.assert_allclose(acc, s.amps, rtol=0, atol=4e-7)


class TestDensity:
    def test_pauli_expectations(self):
        phi = DensityMatrix.from_state(bell_state(BellKind.PHI_PLUS))
        assert abs(expectation(phi, PauliString.parse("ZZ")) - 1) < 1e-12
        # direct 4x4 trace: Y (x) Y has entries -1 on the anti-diagonal corners
        yy = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))
        assert abs(np.trace(yy @ phi.mat).real + 1) < 1e-12
        assert abs(expectation(phi, PauliString.parse("YY")) + 1) < 1e-12
        assert abs(expectation(DensityMatrix.maximally_mixed(2), PauliString.parse("XX"))) < 1e-15

    def test_fidelity_examples(self):
        phi = bell_state(BellKind.PHI_PLUS)
        assert abs(fidelity_pure(DensityMatrix.from_state(phi), phi) - 1) < 1e-12
        assert abs(fidelity_pure(DensityMatrix.maximally_mixed(2), phi) - 0.25) < 1e-12

    @given(qubit_states(2), qubit_states(2))
    def test_fidelity_of_pure_states(self, a, b):
        want = abs(sum(x.conjugate() * y for x, y in zip(b.amps, a.amps))) ** 2
        assert abs(fidelity_pure(DensityMatrix.from_state(a), b) - want) < 1e-12

    def test_random_density_valid(self, rng):
        for rank in (1, 2, 4):
            assert random_density_matrix(2, rng, rank).is_valid()

    def test_partial_trace_of_product(self, rng):
        a, b = random_state(1, rng), random_state(2, rng)
        rho = DensityMatrix.from_state(tensor(a, b))
        np.testing.assert_allclose(partial_trace(rho, [1, 2]).mat, np.outer(b.amps, b.amps.conj()), atol=1e-12)
        np.testing.assert_allclose(partial_trace(rho, [0]).mat, np.outer(a.amps, a.amps.conj()), atol=1e-12)

    def test_partial_trace_of_bell_is_mixed(self):
        rho = DensityMatrix.from_state(bell_state(BellKind.PSI_MINUS))
        np.testing.assert_allclose(partial_trace(rho, [1]).mat, np.eye(2) / 2, atol=1e-15)

    @given(qubit_states(3))
    def test_partial_trace_keeps_unit_trace(self, s):
        rho = DensityMatrix.from_state(s)
        for keep in ([0], [2, 0], [1, 2]):
            assert partial_trace(rho, keep).is_valid(1e-12)

    def test_mixture_weights(self):
        a = DensityMatrix.from_state(QubitState.from_label("H"))
        b = DensityMatrix.from_state(QubitState.from_label("V"))
        np.testing.assert_allclose(DensityMatrix.mixture([(3, a), (1, b)]).mat, np.diag([0.75, 0.25]))


class TestPauli:
    def test_xz_label_is_product(self):
        np.testing.assert_allclose(PauliString(("XZ",)).matrix(), [[0, -1], [1, 0]])
        assert PauliString.parse("XZ,I").ops == ("XZ", "I")
        assert PauliString.parse("XZ").ops == ("X", "Z")

    def test_bad_label(self):
        with pytest.raises(ValueError):
            PauliString(("Q",))

    @given(qubit_states(2))
    def test_corrections_are_involutions_up_to_phase(self, s):
        for ops in itertools.product(("I", "X", "Z", "XZ"), repeat=2):
            p = PauliString(ops)
            assert same_up_to_phase(p.apply(p.apply(s)), s, 1e-12)
