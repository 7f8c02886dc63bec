"""Gate teleportation of a C-NOT through the four-photon resource state chi.

Photon ``k`` of the experiment is qubit ``k - 1`` of the six-qubit joint state.
Photon 1 is the target input, photon 2 the control input; Bell measurements
act on photons (1, 3) and (2, 5) and the gate output emerges on photons
(4, 6).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import optics
from .optics import OpticalState, PDBS, PDBS_PRIME
from .qstate import (
    CHAIN_TOL,
    BellKind,
    DensityMatrix,
    PauliString,
    QubitState,
    apply_gate,
    bell_decompose,
    bell_state,
    cnot_matrix,
    project_bell,
    tensor,
)

PHOTONS = (1, 2, 3, 4, 5, 6)
CHI_PHOTONS = (3, 4, 5, 6)
CHI_MODES = ("3", "4''", "5", "6''")
BSM_PAIRS = ((1, 3), (2, 5))
OUTPUT_PHOTONS = (4, 6)

U_CNOT = cnot_matrix(2, control=1, target=0)

PHI_KINDS = (BellKind.PHI_PLUS, BellKind.PHI_MINUS)
COINCIDENCES = ("++", "--", "+-", "-+")


def ideal_output(inp: QubitState) -> QubitState:
    """``U_CNOT |T>_1 |C>_2``: the target (qubit 0) flips when the control is V."""
    if inp.n != 2:
        raise ValueError("gate input must be a two-qubit state")
    return QubitState(2, U_CNOT @ inp.amps)


# ---------------------------------------------------------------------------
# resource state

CHI_AMPLITUDES = 0.5 * np.array(
    # (HH + VV)_34 HH_56 + (HV + VH)_34 VV_56
    [1, 0, 0, 0, 0, 0, 0, 1, 0, 0, 0, 1, 1, 0, 0, 0], dtype=complex
)


def build_chi_circuit() -> QubitState:
    """chi on photons (3, 4, 5, 6): two Phi+ pairs and a C-NOT from photon 6 onto photon 4."""
    pairs = tensor(bell_state(BellKind.PHI_PLUS), bell_state(BellKind.PHI_PLUS))
    return apply_gate(pairs, "CNOT", (3, 1))


def chi_optical_state(
    g: float | None = None,
    n_pairs_max: int = 1,
    hwp: bool = True,
    n_max: int = optics.DEFAULT_N_MAX,
) -> OpticalState:
    """Photons 3-6 after the PDBS, both PDBS' and (optionally) the 22.5 deg HWPs.

    ``g=None`` feeds exactly one pair per source; otherwise truncated SPDC
    sources with pair parameter ``g``.
    """
    if g is None:
        s34 = optics.pair_operator_power(("3", "4"), 1, n_max)
        s56 = optics.pair_operator_power(("5", "6"), 1, n_max)
    else:
        s34 = optics.spdc_source(("3", "4"), g, n_pairs_max, n_max)
        s56 = optics.spdc_source(("5", "6"), g, n_pairs_max, n_max)
    s = optics.tensor_optical(s34, s56, n_max)
    return chi_network(s, hwp=hwp)


def chi_network(s: OpticalState, hwp: bool = True) -> OpticalState:
    s = optics.apply_beamsplitter(s, ("4", "6"), PDBS, ("4'", "6'"))
    s = s.with_modes("loss4", "loss6", tags=sorted({m.tag for m in s.modes}))
    s = optics.apply_beamsplitter(s, ("4'", "loss4"), PDBS_PRIME, ("4''", "loss4'"))
    s = optics.apply_beamsplitter(s, ("6'", "loss6"), PDBS_PRIME, ("6''", "loss6'"))
    if hwp:
        s = optics.apply_hwp(s, "3", 22.5)
        s = optics.apply_hwp(s, "4''", 22.5)
    return s


def build_chi_optical(
    g: float | None = None, n_pairs_max: int = 1, hwp: bool = True
) -> tuple[QubitState, float]:
    """Post-selected four-fold output of the optical network as a qubit state."""
    n_max = 4 * n_pairs_max if g is not None else optics.DEFAULT_N_MAX
    s = chi_optical_state(g, n_pairs_max, hwp, max(n_max, optics.DEFAULT_N_MAX))
    prob, post = optics.postselect(s, CHI_MODES)
    if post is None:
        raise ValueError("no four-fold coincidence amplitude")
    return optics.to_qubit_state(post, CHI_MODES), prob


# ---------------------------------------------------------------------------
# Bell measurements


@dataclass(frozen=True)
class BsmOutcome:
    """Detected coincidence of a PBS Bell measurement.

    ``++``/``--`` herald Phi+, ``+-``/``-+`` herald Phi-. The discard bucket
    (no one-photon-per-port coincidence) has ``kind=None``.
    """

    kind: BellKind | None
    coincidence: str

    def __post_init__(self) -> None:
        if self.coincidence == "discard":
            if self.kind is not None:
                raise ValueError("discard outcome carries no Bell kind")
            return
        if self.coincidence not in COINCIDENCES:
            raise ValueError(f"unknown coincidence pattern {self.coincidence!r}")
        if self.kind is not kind_for_coincidence(self.coincidence):
            raise ValueError(f"pattern {self.coincidence} does not herald {self.kind}")

    @property
    def detected(self) -> bool:
        return self.kind is not None


def kind_for_coincidence(pattern: str) -> BellKind:
    return BellKind.PHI_PLUS if pattern in ("++", "--") else BellKind.PHI_MINUS


def bsm_ideal(s: QubitState, pair: tuple[int, int]) -> list[tuple[BellKind, float, QubitState | None]]:
    return bell_decompose(s, pair)


def bsm_analyzer(s: OpticalState, modes: tuple[str, str]) -> OpticalState:
    """PBS, reflection-phase compensation, then 22.5 deg HWPs on both outputs.

    The PBS puts a factor ``i`` on each reflected V photon; a retarder giving
    V a phase ``-i`` in each output undoes it, so H/V coincidences after the
    HWPs read out ``+/-`` directly.
    """
    s = optics.apply_pbs(s, modes)
    jones = optics.hwp_matrix(22.5) @ np.diag([1.0, -1j])
    for m in modes:
        s = optics.apply_jones(s, m, jones)
    return s


_SIGN = {"H": "+", "V": "-"}


def bsm_optical(
    s: OpticalState, modes: tuple[str, str]
) -> list[tuple[BsmOutcome, float, OpticalState | None]]:
    """PBS Bell measurement with one-photon-per-port post-selection.

    Returns the four coincidence outcomes (with renormalized remainders on the
    undetected modes) followed by the discard bucket.
    """
    a, b = modes
    for m in s.modes:
        if m.spatial in modes and m.tag:
            raise ValueError("bsm_optical assumes untagged photons in the measured modes")
    s = bsm_analyzer(s, modes)
    idx = {m: i for i, m in enumerate(s.modes)}
    keep = [i for i, m in enumerate(s.modes) if m.spatial not in modes]
    out = []
    total = s.norm_sq()
    detected = 0.0
    for pa, pb in itertools.product(optics.POLS, repeat=2):
        want = {optics.ModeLabel(a, pa): 1, optics.ModeLabel(a, _other(pa)): 0,
                optics.ModeLabel(b, pb): 1, optics.ModeLabel(b, _other(pb)): 0}
        terms: dict[tuple[int, ...], complex] = {}
        for occ, amp in s.terms.items():
            if all(occ[idx[m]] == c for m, c in want.items()):
                key = tuple(occ[i] for i in keep)
                terms[key] = terms.get(key, 0) + amp
        prob = sum(abs(v) ** 2 for v in terms.values()) / total
        detected += prob
        pattern = _SIGN[pa] + _SIGN[pb]
        outcome = BsmOutcome(kind_for_coincidence(pattern), pattern)
        if prob < 1e-14:
            out.append((outcome, 0.0, None))
            continue
        rem = OpticalState(tuple(s.modes[i] for i in keep), terms, s.n_max).normalized()
        out.append((outcome, float(prob), rem))
    out.sort(key=lambda r: COINCIDENCES.index(r[0].coincidence))
    out.append((BsmOutcome(None, "discard"), max(0.0, 1.0 - detected), None))
    return out


def _other(pol: str) -> str:
    return "V" if pol == "H" else "H"


# ---------------------------------------------------------------------------
# feed-forward corrections

_TABLE_TEXT = {
    ("Phi+", "Phi+"): ("I", "I"),
    ("Phi+", "Phi-"): ("I", "Z"),
    ("Phi+", "Psi+"): ("X", "X"),
    ("Phi+", "Psi-"): ("X", "XZ"),
    ("Phi-", "Phi+"): ("Z", "Z"),
    ("Phi-", "Phi-"): ("Z", "I"),
    ("Phi-", "Psi+"): ("XZ", "XZ"),
    ("Phi-", "Psi-"): ("XZ", "X"),
    ("Psi+", "Phi+"): ("X", "I"),
    ("Psi+", "Phi-"): ("X", "Z"),
    ("Psi+", "Psi+"): ("I", "X"),
    ("Psi+", "Psi-"): ("I", "XZ"),
    ("Psi-", "Phi+"): ("XZ", "Z"),
    ("Psi-", "Phi-"): ("XZ", "I"),
    ("Psi-", "Psi+"): ("Z", "XZ"),
    ("Psi-", "Psi-"): ("Z", "X"),
}


@dataclass(frozen=True)
class CorrectionTable:
    """Pauli frame on photons (4, 6) left behind by each pair of Bell outcomes.

    ``raw_output = entry · Psi_out`` up to a global phase, so applying the entry
    again restores ``Psi_out``.
    """

    entries: Mapping[tuple[BellKind, BellKind], PauliString] = field(
        default_factory=lambda: {
            (BellKind.parse(k13), BellKind.parse(k25)): PauliString(ops)
            for (k13, k25), ops in _TABLE_TEXT.items()
        }
    )

    def __getitem__(self, key: tuple[BellKind, BellKind]) -> PauliString:
        return self.entries[key]

    def replaced(self, key: tuple[BellKind, BellKind], entry: PauliString) -> "CorrectionTable":
        d = dict(self.entries)
        d[key] = entry
        return CorrectionTable(d)


DEFAULT_TABLE = CorrectionTable()


def correction_for(k13: BellKind, k25: BellKind, table: CorrectionTable = DEFAULT_TABLE) -> PauliString:
    return table[(k13, k25)]


# ---------------------------------------------------------------------------
# the protocol


@dataclass(frozen=True, eq=False)
class GateRun:
    input: QubitState
    outcome13: BellKind
    outcome25: BellKind
    raw_output: QubitState
    corrected_output: QubitState
    branch_prob: float

    @property
    def fidelity(self) -> float:
        ideal = ideal_output(self.input)
        return abs(np.vdot(ideal.amps, self.corrected_output.amps)) ** 2


def joint_state(inp: QubitState, chi: QubitState | None = None) -> QubitState:
    if inp.n != 2:
        raise ValueError("gate input must be a two-qubit state")
    if abs(inp.norm() - 1) > CHAIN_TOL:
        raise ValueError("gate input must be normalized")
    return tensor(inp, build_chi_circuit() if chi is None else chi)


def _branch(state: QubitState, k13: BellKind, k25: BellKind) -> tuple[float, QubitState | None]:
    # joint qubits are photons 1..6; after projecting photons 1&3 the
    # remainder holds photons (2, 4, 5, 6)
    p13, rem = project_bell(state, (0, 2), k13)
    if rem is None:
        return 0.0, None
    p25, out = project_bell(rem, (0, 2), k25)
    return p13 * p25, out


def branch_probabilities(inp: QubitState, chi: QubitState | None = None) -> dict[tuple[BellKind, BellKind], float]:
    state = joint_state(inp, chi)
    return {
        (k13, k25): _branch(state, k13, k25)[0]
        for k13, k25 in itertools.product(BellKind, repeat=2)
    }


def teleport_cnot(
    inp: QubitState,
    branch: tuple[BellKind, BellKind] | None = None,
    rng: np.random.Generator | None = None,
    table: CorrectionTable = DEFAULT_TABLE,
    chi: QubitState | None = None,
) -> GateRun:
    """Run one branch of the teleported C-NOT.

    Either name the Bell outcomes via ``branch`` or pass ``rng`` to sample them.
    """
    state = joint_state(inp, chi)
    if branch is None:
        if rng is None:
            raise ValueError("pass either a branch or an rng to sample one")
        keys = list(itertools.product(BellKind, repeat=2))
        probs = np.array([_branch(state, *k)[0] for k in keys])
        branch = keys[rng.choice(len(keys), p=probs / probs.sum())]
    k13, k25 = branch
    prob, raw = _branch(state, k13, k25)
    if raw is None:
        raise ValueError(f"branch {k13},{k25} has zero probability")
    corrected = table[(k13, k25)].apply(raw)
    return GateRun(inp, k13, k25, raw, corrected, prob)


@dataclass(frozen=True)
class BranchCheck:
    k13: BellKind
    k25: BellKind
    prob: float
    overlap: float

    @property
    def ok(self) -> bool:
        return abs(self.overlap - 1) < CHAIN_TOL


@dataclass(frozen=True)
class DecompositionReport:
    branches: tuple[BranchCheck, ...]

    @property
    def ok(self) -> bool:
        return all(b.ok for b in self.branches) and abs(self.total_prob - 1) < CHAIN_TOL

    @property
    def total_prob(self) -> float:
        return sum(b.prob for b in self.branches)

    @property
    def failures(self) -> list[BranchCheck]:
        return [b for b in self.branches if not b.ok]


def _dense_bell_projector(k13: BellKind, k25: BellKind) -> np.ndarray:
    """``<Bell_13| <Bell_25|`` as a 4 x 64 map onto photons (4, 6), built by index loops."""
    b13, b25 = bell_state(k13).amps, bell_state(k25).amps
    proj = np.zeros((4, 64), dtype=complex)
    for idx in range(64):
        p = [(idx >> (5 - q)) & 1 for q in range(6)]
        c13 = b13[2 * p[0] + p[2]].conjugate()
        c25 = b25[2 * p[1] + p[4]].conjugate()
        proj[2 * p[3] + p[5], idx] += c13 * c25
    return proj


def verify_decomposition(
    inp: QubitState, table: CorrectionTable = DEFAULT_TABLE, chi: QubitState | None = None
) -> DecompositionReport:
    """Expand ``|Psi_in>_12 |chi>_3456`` in the Bell x Bell basis on (1,3)x(2,5).

    Each residual on (4, 6) must equal the table's Pauli string applied to
    ``Psi_out`` up to phase. Residuals come from explicit projectors, not from
    :func:`teleport_cnot`.
    """
    state = joint_state(inp, chi).amps
    psi_out = ideal_output(inp)
    checks = []
    for k13, k25 in itertools.product(BellKind, repeat=2):
        resid = _dense_bell_projector(k13, k25) @ state
        prob = float(np.vdot(resid, resid).real)
        expected = table[(k13, k25)].apply(psi_out).amps
        ov = abs(np.vdot(expected, resid)) ** 2 / prob if prob > 0 else 0.0
        checks.append(BranchCheck(k13, k25, prob, float(ov)))
    return DecompositionReport(tuple(checks))


def derive_correction_table(inp: QubitState | None = None) -> CorrectionTable:
    """Search {I, X, Z, XZ}^2 for the frame of each branch; a cross-check of the stored table."""
    rng = np.random.default_rng(0)
    if inp is None:
        from .qstate import random_state

        inp = random_state(2, rng)
    state = joint_state(inp)
    psi_out = ideal_output(inp)
    entries = {}
    for key in itertools.product(BellKind, repeat=2):
        _, raw = _branch(state, *key)
        for ops in itertools.product(("I", "X", "Z", "XZ"), repeat=2):
            cand = PauliString(ops).apply(psi_out)
            if abs(abs(np.vdot(cand.amps, raw.amps)) - 1) < CHAIN_TOL:
                entries[key] = PauliString(ops)
                break
        else:
            raise RuntimeError(f"no Pauli frame found for branch {key}")
    return CorrectionTable(entries)


def detectable_fraction(pair_probs: Mapping[tuple[BellKind, BellKind], float]) -> float:
    return sum(p for (a, b), p in pair_probs.items() if a in PHI_KINDS and b in PHI_KINDS)


def product_factors(inp: QubitState) -> tuple[np.ndarray, np.ndarray]:
    """Split a two-qubit product state into its single-photon Jones vectors."""
    m = inp.amps.reshape(2, 2)
    u, sv, vh = np.linalg.svd(m)
    if sv[1] > 1e-9:
        raise ValueError("input is entangled; polarizer preparation needs a product state")
    return u[:, 0] * sv[0], vh[0, :]



def detected_output(inp: QubitState, table: CorrectionTable = DEFAULT_TABLE) -> DensityMatrix:
    """Corrected output pooled over the four heralded Phi x Phi branches."""
    runs = [teleport_cnot(inp, (k13, k25), table=table) for k13 in PHI_KINDS for k25 in PHI_KINDS]
    return DensityMatrix.mixture((r.branch_prob, DensityMatrix.from_state(r.corrected_output)) for r in runs)
