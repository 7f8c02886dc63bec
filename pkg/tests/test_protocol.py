import itertools

import numpy as np
import pytest
from hypothesis import given, settings

from telecnot import optics
from telecnot.protocol import (
    CHI_AMPLITUDES,
    CHI_MODES,
    DEFAULT_TABLE,
    BsmOutcome,
    CorrectionTable,
    branch_probabilities,
    bsm_ideal,
    bsm_optical,
    build_chi_circuit,
    build_chi_optical,
    correction_for,
    derive_correction_table,
    detectable_fraction,
    detected_output,
    ideal_output,
    product_factors,
    teleport_cnot,
    verify_decomposition,
)
from telecnot.qstate import (
    BellKind,
    PauliString,
    QubitState,
    bell_state,
    fidelity_pure,
    random_state,
    same_up_to_phase,
    tensor,
)

from conftest import qubit_states

P, M, S, A = BellKind.PHI_PLUS, BellKind.PHI_MINUS, BellKind.PSI_PLUS, BellKind.PSI_MINUS

# Pauli frame on photons (4, 6) for each pair of Bell outcomes on (1,3) and (2,5)
EXPECTED_TABLE = {
    (P, P): ("I", "I"), (P, M): ("I", "Z"), (P, S): ("X", "X"), (P, A): ("X", "XZ"),
    (M, P): ("Z", "Z"), (M, M): ("Z", "I"), (M, S): ("XZ", "XZ"), (M, A): ("XZ", "X"),
    (S, P): ("X", "I"), (S, M): ("X", "Z"), (S, S): ("I", "X"), (S, A): ("I", "XZ"),
    (A, P): ("XZ", "Z"), (A, M): ("XZ", "I"), (A, S): ("Z", "XZ"), (A, A): ("Z", "X"),
}


class TestResource:
    def test_chi_amplitudes(self):
        chi = build_chi_circuit()
        assert abs(chi.amps[0b0000] - 0.5) < 1e-15
        assert abs(chi.amps[0b1111]) < 1e-15
        np.testing.assert_allclose(chi.amps, CHI_AMPLITUDES, atol=1e-15)

    def test_overlap_with_two_pairs(self):
        pairs = tensor(bell_state(P), bell_state(P))
        assert abs(abs(np.vdot(pairs.amps, build_chi_circuit().amps)) - 0.5) < 1e-12

    def test_optical_construction(self):
        chi, prob = build_chi_optical()
        assert same_up_to_phase(chi, build_chi_circuit(), 1e-10)
        assert abs(prob - 1 / 9) < 1e-12

    def test_without_waveplates(self):
        # 1/2 (HHHH + HHVV + VVHH - VVVV) on (3, 4'', 5, 6'')
        chi, prob = build_chi_optical(hwp=False)
        want = np.zeros(16)
        want[[0b0000, 0b0011, 0b1100]] = 0.5
        want[0b1111] = -0.5
        assert abs(abs(np.vdot(want, chi.amps)) - 1) < 1e-12
        assert abs(prob - 1 / 9) < 1e-12

    def test_weak_spdc_matches(self):
        chi, _ = build_chi_optical(g=1e-3, n_pairs_max=1)
        assert same_up_to_phase(chi, build_chi_circuit(), 1e-10)

    def test_chi_modes(self):
        assert CHI_MODES == ("3", "4''", "5", "6''")


class TestBsm:
    @pytest.mark.parametrize("kind", [P, M])
    def test_phi_patterns(self, kind):
        s = optics.from_qubit_state(bell_state(kind), ["a", "b"])
        res = {o.coincidence: p for o, p, _ in bsm_optical(s, ("a", "b"))}
        pats = ("++", "--") if kind is P else ("+-", "-+")
        for pat in pats:
            assert abs(res[pat] - 0.5) < 1e-12
        assert abs(sum(res.values()) - 1) < 1e-12

    @pytest.mark.parametrize("kind", [S, A])
    def test_psi_gives_no_coincidence(self, kind):
        s = optics.from_qubit_state(bell_state(kind), ["a", "b"])
        res = {o.coincidence: p for o, p, _ in bsm_optical(s, ("a", "b"))}
        assert all(res[p] == 0.0 for p in ("++", "--", "+-", "-+"))
        assert abs(res["discard"] - 1) < 1e-12

    @settings(max_examples=25, deadline=None)
    @given(qubit_states(3))
    def test_matches_ideal_projection(self, q):
        # photons a, b measured; c carried along
        s = optics.from_qubit_state(q, ["a", "b", "c"])
        ideal = {k: (p, r) for k, p, r in bsm_ideal(q, (0, 1))}
        for kind in (P, M):
            hits = [(p, r) for o, p, r in bsm_optical(s, ("a", "b")) if o.kind is kind]
            assert abs(sum(p for p, _ in hits) - ideal[kind][0]) < 1e-10
            for p, r in hits:
                if p > 1e-9:
                    got = optics.to_qubit_state(r, ["c"])
                    assert same_up_to_phase(got, ideal[kind][1], 1e-9)

    def test_outcome_validation(self):
        with pytest.raises(ValueError):
            BsmOutcome(M, "++")
        with pytest.raises(ValueError):
            BsmOutcome(P, "discard")
        assert not BsmOutcome(None, "discard").detected


class TestCorrections:
    def test_table_entries(self):
        for key, ops in EXPECTED_TABLE.items():
            assert DEFAULT_TABLE[key] == PauliString(ops), key

    def test_derived_table_matches(self):
        derived = derive_correction_table()
        for key in itertools.product(BellKind, repeat=2):
            assert derived[key] == DEFAULT_TABLE[key]

    def test_lookup_helpers(self):
        assert correction_for(P, P) == PauliString(("I", "I"))
        assert correction_for(M, P) == PauliString(("Z", "Z"))
        assert correction_for(S, P) == PauliString(("X", "I"))

    def test_replaced_copy(self):
        t = DEFAULT_TABLE.replaced((P, P), PauliString(("X", "I")))
        assert t[(P, P)] != DEFAULT_TABLE[(P, P)]
        assert isinstance(t, CorrectionTable)


class TestTeleport:
    def test_vv_to_hv(self):
        for branch in itertools.product(BellKind, repeat=2):
            run = teleport_cnot(QubitState.from_label("VV"), branch)
            assert same_up_to_phase(run.corrected_output, QubitState.from_label("HV"), 1e-10)

    def test_entangling_input(self):
        run = teleport_cnot(QubitState.from_label("H+"), (M, S))
        assert abs(run.fidelity - 1) < 1e-10
        assert same_up_to_phase(run.corrected_output, bell_state(P), 1e-10)

    def test_output_form(self, rng):
        a, b, c, d = rng.normal(size=4) + 1j * rng.normal(size=4)
        inp = QubitState.from_amplitudes([a, b, c, d])
        # alpha HH + beta VV + gamma VH + delta HV in terms of the input amplitudes
        n = np.linalg.norm([a, b, c, d])
        want = QubitState(2, np.array([a, d, c, b]) / n)
        assert same_up_to_phase(ideal_output(inp), want, 1e-12)

    @settings(max_examples=30, deadline=None)
    @given(qubit_states(2))
    def test_every_branch_is_corrected(self, inp):
        rep = verify_decomposition(inp)
        assert rep.ok, rep.failures
        assert abs(rep.total_prob - 1) < 1e-10

    def test_uniform_branches(self, rng):
        probs = branch_probabilities(random_state(2, rng))
        assert len(probs) == 16
        for p in probs.values():
            assert abs(p - 1 / 16) < 1e-12
        assert abs(detectable_fraction(probs) - 0.25) < 1e-12

    def test_sampled_branch_deterministic(self):
        inp = QubitState.from_label("+V")
        a = teleport_cnot(inp, rng=np.random.default_rng(5))
        b = teleport_cnot(inp, rng=np.random.default_rng(5))
        assert (a.outcome13, a.outcome25) == (b.outcome13, b.outcome25)
        assert abs(a.fidelity - 1) < 1e-10

    def test_needs_branch_or_rng(self):
        with pytest.raises(ValueError):
            teleport_cnot(QubitState.from_label("HH"))

    def test_corrupted_table_is_detected(self, rng):
        bad = DEFAULT_TABLE.replaced((S, A), PauliString(("I", "I")))
        rep = verify_decomposition(random_state(2, rng), bad)
        assert [(b.k13, b.k25) for b in rep.failures] == [(S, A)]

    def test_detected_output(self):
        rho = detected_output(QubitState.from_label("H+"))
        assert abs(fidelity_pure(rho, bell_state(P)) - 1) < 1e-12

    def test_product_factors(self):
        a, b = product_factors(QubitState.from_label("H+"))
        assert abs(abs(np.vdot(np.kron(a, b), QubitState.from_label("H+").amps)) - 1) < 1e-12
        with pytest.raises(ValueError):
            product_factors(bell_state(P))
