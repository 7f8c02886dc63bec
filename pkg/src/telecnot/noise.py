"""Six-photon experiment with double-pair emission, distinguishability and input noise.

Pipeline per pulse:

1. three SPDC sources on modes (1,2), (3,4), (5,6), expanded in pair number
   up to ``n_pairs_max`` per source and ``truncation`` photons in total;
2. H polarizers on photons 1 and 2 (blocked light goes to loss modes), then
   wave plates rotating H onto the requested product input;
3. PDBS on 4 & 6, PDBS' in each output, 22.5 deg HWPs on arms 3 and 4'';
4. PBS Bell analyzers on (1, 3) and (2, 5) with +/- readout.

Detection: every BSM arm must fire exactly one of its two threshold
detectors (+ or -); arms 4'' and 6'' must hold exactly one photon each, whose
polarizations form the output qubits. Loss ports are traced out. Tracing is
exact: terms that differ anywhere outside the output polarizations are
orthogonal and add incoherently.

Distinguishability: at each interference site one input photon is either
indistinguishable (weight ``v``) or carries a tag that makes it orthogonal to
its partner (weight ``1 - v``). The three sites give eight tagged runs that
are mixed classically.
"""
from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import optics
from .optics import OpticalState, TruncationError
from .protocol import (
    COINCIDENCES,
    DEFAULT_TABLE,
    bsm_analyzer,
    bsm_optical,
    build_chi_optical,
    chi_network,
    correction_for,
    ideal_output,
    kind_for_coincidence,
    product_factors,
)
from .qstate import (
    BellKind,
    DensityMatrix,
    QubitState,
    ZeroProbabilityError,
    basis_state,
    bell_state,
    fidelity_pure,
)
from .tomography import (
    ENTANGLING_INPUT,
    FidelityReport,
    IncompleteDataError,
    linear_inversion,
    sample_counts,
    three_setting_fidelity,
    truth_table_fidelities,
)

SITES = ("pdbs", "bsm13", "bsm25")
# photon made distinguishable at each site
_TAGGED_MODE = {"pdbs": "6", "bsm13": "1", "bsm25": "2"}
SOURCE_MODES = (("1", "2"), ("3", "4"), ("5", "6"))
BSM_MODES = (("1", "3"), ("2", "5"))
OUTPUT_MODES = ("4''", "6''")
BRANCHES = tuple(itertools.product(COINCIDENCES, repeat=2))
ALL_SETTINGS = tuple(a + b for a in "XYZ" for b in "XYZ")


@dataclass(frozen=True)
class NoiseParams:
    """Imperfection knobs. ``g*`` are per-source pair parameters, ``v_*`` visibilities."""

    g1: float = 0.0
    g2: float = 0.0
    g3: float = 0.0
    v_pdbs: float = 1.0
    v_bsm13: float = 1.0
    v_bsm25: float = 1.0
    input_error: float = 0.0
    n_pairs_max: int = 1
    truncation: int = 8

    def __post_init__(self) -> None:
        for name in ("g1", "g2", "g3"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("v_pdbs", "v_bsm13", "v_bsm25", "input_error"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1]")
        if self.n_pairs_max not in (1, 2):
            raise ValueError("n_pairs_max must be 1 or 2")
        if self.truncation < 6:
            raise ValueError("six-fold coincidences need a truncation of at least 6 photons")

    @classmethod
    def uniform(
        cls, g: float = 0.0, visibility: float = 1.0, input_error: float = 0.0,
        n_pairs_max: int = 2, truncation: int = 8,
    ) -> "NoiseParams":
        return cls(g, g, g, visibility, visibility, visibility, input_error, n_pairs_max, truncation)

    @property
    def gs(self) -> tuple[float, float, float]:
        return (self.g1, self.g2, self.g3)

    @property
    def visibilities(self) -> dict[str, float]:
        return {"pdbs": self.v_pdbs, "bsm13": self.v_bsm13, "bsm25": self.v_bsm25}


IDEAL = NoiseParams()


# ---------------------------------------------------------------------------
# propagation


def _can_fire(cfg: Sequence[int]) -> bool:
    # each BSM and the output pair needs at least two photons
    a, b, c = cfg
    return a + b >= 2 and a + c >= 2 and b + c >= 2


def emission_configs(n_pairs_max: int, truncation: int) -> list[tuple[int, int, int]]:
    """Pair numbers (source 12, 34, 56) that fit the budget and can fake a six-fold."""
    out = []
    for cfg in itertools.product(range(n_pairs_max + 1), repeat=3):
        if 2 * sum(cfg) <= truncation and _can_fire(cfg):
            out.append(cfg)
    return out


def _jones_from(vec: np.ndarray) -> np.ndarray:
    a0, a1 = vec / np.linalg.norm(vec)
    return np.array([[a0, -np.conj(a1)], [a1, np.conj(a0)]], dtype=complex)


def _input_key(inp: QubitState) -> tuple:
    a, b = product_factors(inp)
    # factors are defined up to a phase swap between them; fix it on the
    # target photon so the cache key is canonical
    k = int(np.argmax(np.abs(a)))
    ph = a[k] / abs(a[k])
    a, b = a / ph, b * ph
    return tuple(np.round(a, 13)) + tuple(np.round(b, 13))


@functools.lru_cache(maxsize=4096)
def _propagate(cfg: tuple[int, int, int], key: tuple, tags: frozenset, truncation: int) -> OpticalState:
    sources = [optics.pair_operator_power(m, n, truncation) for m, n in zip(SOURCE_MODES, cfg)]
    s = functools.reduce(lambda x, y: optics.tensor_optical(x, y, truncation), sources)
    for site in sorted(tags):
        s = s.retagged(_TAGGED_MODE[site], site)
    a, b = np.array(key[:2]), np.array(key[2:])
    s = optics.apply_polarizer(s, "1", "pol1", "H")
    s = optics.apply_polarizer(s, "2", "pol2", "H")
    s = optics.apply_jones(s, "1", _jones_from(a))
    s = optics.apply_jones(s, "2", _jones_from(b))
    s = chi_network(s)
    for modes in BSM_MODES:
        s = bsm_analyzer(s, modes)
    return s


def _superpose(states: Sequence[OpticalState], coeffs: Sequence[float]) -> OpticalState:
    modes = states[0].modes
    terms: dict[tuple[int, ...], complex] = {}
    for st, c in zip(states, coeffs):
        if st.modes != modes:
            order = [st.modes.index(m) for m in modes]
            if len(order) != len(st.modes):
                raise RuntimeError("emission configurations ended on different mode sets")
            items = ((tuple(o[i] for i in order), v) for o, v in st.terms.items())
        else:
            items = st.terms.items()
        for occ, v in items:
            terms[occ] = terms.get(occ, 0) + c * v
    return OpticalState(modes, terms, max(s.n_max for s in states))


_SIGN = {"H": "+", "V": "-"}


def detect(s: OpticalState) -> dict[tuple[str, str], np.ndarray]:
    """Unnormalized output states (photons 4'', 6'') per pair of BSM click patterns."""
    arms = [m for pair in BSM_MODES for m in pair]
    arm_slots = {(sp, p): [] for sp in arms for p in optics.POLS}
    out_slots: dict[int, tuple[int, str, str]] = {}
    env_idx = []
    for i, m in enumerate(s.modes):
        if m.spatial in OUTPUT_MODES:
            out_slots[i] = (OUTPUT_MODES.index(m.spatial), m.pol, m.tag)
            continue
        env_idx.append(i)
        if m.spatial in arms:
            arm_slots[(m.spatial, m.pol)].append(i)
    out_idx = list(out_slots)

    groups: dict[tuple, tuple[tuple[str, str], np.ndarray]] = {}
    for occ, amp in s.terms.items():
        photons = [(out_slots[i], occ[i]) for i in out_idx if occ[i]]
        if len(photons) != 2 or any(c != 1 for _, c in photons):
            continue
        (q0, p0, t0), (q1, p1, t1) = sorted(p for p, _ in photons)
        if (q0, q1) != (0, 1):
            continue
        signs = []
        for sp in arms:
            h = any(occ[i] for i in arm_slots[(sp, "H")])
            v = any(occ[i] for i in arm_slots[(sp, "V")])
            if h == v:
                break
            signs.append(_SIGN["H" if h else "V"])
        else:
            branch = (signs[0] + signs[1], signs[2] + signs[3])
            env = (tuple(occ[i] for i in env_idx), t0, t1)
            if env not in groups:
                groups[env] = (branch, np.zeros(4, dtype=complex))
            groups[env][1][2 * optics.POLS.index(p0) + optics.POLS.index(p1)] += amp
    rhos: dict[tuple[str, str], np.ndarray] = {}
    for branch, vec in groups.values():
        if branch not in rhos:
            rhos[branch] = np.zeros((4, 4), dtype=complex)
        rhos[branch] += np.outer(vec, vec.conj())
    return rhos


def _config_amplitudes(params: NoiseParams, configs: Sequence[tuple[int, int, int]]) -> dict:
    """Relative pair-emission amplitudes ``prod g^n sqrt(n+1)``, scaled to stay finite as g -> 0."""
    gs = params.gs
    top = max(gs)
    amps = {}
    for cfg in configs:
        if top == 0.0:
            # g -> 0 limit keeps only the lowest photon order
            amps[cfg] = math.prod(math.sqrt(n + 1) for n in cfg) if sum(cfg) == 3 else 0.0
            continue
        a = top ** (sum(cfg) - 3)
        for g, n in zip(gs, cfg):
            a *= (g / top) ** n * math.sqrt(n + 1)
        amps[cfg] = a
    return amps


def _tag_mixture(params: NoiseParams) -> list[tuple[float, frozenset]]:
    out = []
    vis = params.visibilities
    for flags in itertools.product((False, True), repeat=3):
        w = 1.0
        for site, tagged in zip(SITES, flags):
            w *= (1 - vis[site]) if tagged else vis[site]
        if w > 0:
            out.append((w, frozenset(s for s, f in zip(SITES, flags) if f)))
    return out


def _input_mixture(params: NoiseParams, inp: QubitState) -> list[tuple[float, QubitState]]:
    p = params.input_error
    out = [(1 - p, inp)] if p < 1 else []
    if p > 0:
        out += [(p / 4, basis_state(bits)) for bits in itertools.product((0, 1), repeat=2)]
    return out


# ---------------------------------------------------------------------------
# results


@dataclass(frozen=True, eq=False)
class FullExperimentResult:
    """Conditional output of the six-fold experiment.

    ``rho_out`` pools the four heralded Bell-outcome pairs after correction.
    ``branch_probs`` maps each pair of click patterns (BSM 1&3, BSM 2&5) to
    its share of the six-fold events. ``rate_factor`` is the six-fold
    probability per emission event that could produce one; 1/72 when only
    single pairs are emitted.
    """

    params: NoiseParams
    input: QubitState
    rho_out: DensityMatrix
    branch_rhos: Mapping[tuple[str, str], DensityMatrix]
    branch_probs: Mapping[tuple[str, str], float]
    rate_factor: float

    @property
    def target(self) -> QubitState:
        return ideal_output(self.input)

    @property
    def fidelity(self) -> float:
        return fidelity_pure(self.rho_out, self.target)


def full_experiment_rho(params: NoiseParams, inp: QubitState) -> FullExperimentResult:
    configs = emission_configs(params.n_pairs_max, params.truncation)
    amps = _config_amplitudes(params, configs)
    configs = [c for c in configs if amps[c] != 0.0]
    acc = {b: np.zeros((4, 4), dtype=complex) for b in BRANCHES}
    emitted = sum(amps[c] ** 2 for c in configs)
    for w_tag, tags in _tag_mixture(params):
        for w_in, state in _input_mixture(params, inp):
            key = _input_key(state)
            states = [_propagate(c, key, tags, params.truncation) for c in configs]
            psi = _superpose(states, [amps[c] for c in configs])
            for branch, rho in detect(psi).items():
                acc[branch] += w_tag * w_in * rho
    total = sum(np.trace(r).real for r in acc.values())
    if total < 1e-14:
        raise ZeroProbabilityError("no six-fold coincidence amplitude for these parameters")
    branch_rhos, branch_probs = {}, {}
    pooled = np.zeros((4, 4), dtype=complex)
    for branch, rho in acc.items():
        p = float(np.trace(rho).real)
        branch_probs[branch] = p / total
        k13, k25 = kind_for_coincidence(branch[0]), kind_for_coincidence(branch[1])
        corr = correction_for(k13, k25, DEFAULT_TABLE).matrix()
        fixed = corr @ rho @ corr.conj().T
        pooled += fixed
        if p > 1e-14:
            branch_rhos[branch] = DensityMatrix(2, fixed / p)
    return FullExperimentResult(
        params=params,
        input=inp,
        rho_out=DensityMatrix(2, pooled / total),
        branch_rhos=branch_rhos,
        branch_probs=branch_probs,
        rate_factor=float(total / emitted),
    )


def noisy_runner(params: NoiseParams):
    """Gate executor for :func:`telecnot.tomography.truth_table`."""

    def run(inp: QubitState) -> DensityMatrix:
        return full_experiment_rho(params, inp).rho_out

    return run


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    params: NoiseParams
    input: QubitState
    shots: int
    seed: int
    branch_counts: Mapping[tuple[str, str], int]
    setting_counts: Mapping[str, np.ndarray]
    rho_estimate: DensityMatrix | None
    fidelity_report: FidelityReport | None
    truth_fidelity: float | None
    rate_factor: float

    def as_dict(self) -> dict:
        return {
            "shots": self.shots,
            "seed": self.seed,
            "branch_counts": {"/".join(k): int(v) for k, v in self.branch_counts.items()},
            "setting_counts": {k: [int(x) for x in v] for k, v in self.setting_counts.items()},
            "truth_fidelity": self.truth_fidelity,
            "fidelity_report": None if self.fidelity_report is None else self.fidelity_report.as_dict(),
            "rate_factor": self.rate_factor,
        }


def _basis_cell(state: QubitState) -> int | None:
    probs = np.abs(state.amps) ** 2
    k = int(np.argmax(probs))
    return k if abs(probs[k] - 1) < 1e-12 else None


def monte_carlo(
    params: NoiseParams,
    inp: QubitState,
    shots: int,
    seed: int,
    settings: Sequence[str] = ALL_SETTINGS,
) -> ExperimentResult:
    """Finite-shot emulation: ``shots`` six-fold events per measurement setting.

    Each event draws a pair of BSM click patterns, then a readout of the
    corrected branch state in the setting's basis.
    """
    if shots < 1:
        raise ValueError("need at least one shot")
    res = full_experiment_rho(params, inp)
    rng = np.random.default_rng(seed)
    probs = np.array([res.branch_probs[b] for b in BRANCHES])
    branch_counts = {b: 0 for b in BRANCHES}
    setting_counts = {}
    for setting in settings:
        per_branch = rng.multinomial(shots, probs / probs.sum())
        counts = np.zeros(4, dtype=np.int64)
        for b, n in zip(BRANCHES, per_branch):
            if n:
                branch_counts[b] += int(n)
                counts += sample_counts(res.branch_rhos[b], setting, int(n), rng)
        setting_counts[setting] = counts
    rho_est = None
    if set(ALL_SETTINGS) <= set(setting_counts):
        rho_est = linear_inversion(setting_counts)
    try:
        report = three_setting_fidelity(setting_counts)
    except IncompleteDataError:
        report = None
    cell = _basis_cell(res.target)
    truth = None
    if cell is not None and "ZZ" in setting_counts:
        zz = setting_counts["ZZ"]
        truth = float(zz[cell] / zz.sum())
    return ExperimentResult(
        params, inp, shots, seed, branch_counts, setting_counts, rho_est, report, truth, res.rate_factor
    )


# ---------------------------------------------------------------------------
# bookkeeping and sweeps


@dataclass(frozen=True)
class RateLedger:
    chi: float
    bsm: float
    polarizer: float
    total: float
    pipeline_total: float

    def as_dict(self) -> dict:
        return {
            "chi": self.chi, "bsm": self.bsm, "polarizer": self.polarizer,
            "total": self.total, "pipeline_total": self.pipeline_total,
        }


def polarizer_factor(inp: QubitState) -> float:
    """Probability that the input polarizers pass a Phi+ pair prepared into ``inp``."""
    s = optics.pair_operator_power(("1", "2"), 1)
    s = optics.apply_polarizer(s, "1", "pol1", "H")
    s = optics.apply_polarizer(s, "2", "pol2", "H")
    a, b = product_factors(inp)
    s = optics.apply_jones(s, "1", _jones_from(a))
    s = optics.apply_jones(s, "2", _jones_from(b))
    prob, post = optics.postselect(s, ["1", "2"])
    if post is not None:
        got = optics.to_qubit_state(post, ["1", "2"])
        if abs(abs(np.vdot(got.amps, inp.amps)) - 1) > 1e-10:
            raise RuntimeError("input preparation produced the wrong state")
    return prob


def bsm_detectable_fraction() -> float:
    """Heralded fraction of one PBS Bell measurement on a uniform Bell mixture."""
    fracs = []
    for kind in BellKind:
        s = optics.from_qubit_state(bell_state(kind), ["a", "b"])
        fracs.append(sum(p for o, p, _ in bsm_optical(s, ("a", "b")) if o.detected))
    return float(np.mean(fracs))


def rate_ledger() -> RateLedger:
    chi = build_chi_optical()[1]
    per_bsm = bsm_detectable_fraction()
    entangling = QubitState.from_label(ENTANGLING_INPUT)
    pol = polarizer_factor(entangling)
    pipeline = full_experiment_rho(IDEAL, entangling).rate_factor
    bsm = per_bsm**2
    return RateLedger(chi=chi, bsm=bsm, polarizer=pol, total=chi * bsm * pol, pipeline_total=pipeline)


@dataclass(frozen=True)
class SweepRow:
    g: float
    v: float
    input_error: float
    f_truth: float
    f_entangle: float
    rate_factor: float
    error: str | None = None


@dataclass(frozen=True)
class SweepTable:
    rows: tuple[SweepRow, ...]
    monotone_in_g: bool
    monotone_in_v: bool
    truth_ge_entangle: bool

    def ok_rows(self) -> list[SweepRow]:
        return [r for r in self.rows if r.error is None]


def sweep_point(
    g: float, v: float, input_error: float, n_pairs_max: int = 2, truncation: int = 8
) -> SweepRow:
    params = NoiseParams.uniform(g, v, input_error, n_pairs_max, truncation)
    try:
        f_truth = float(np.mean(truth_table_fidelities(noisy_runner(params))))
        ent = full_experiment_rho(params, QubitState.from_label(ENTANGLING_INPUT))
        return SweepRow(g, v, input_error, f_truth, ent.fidelity, ent.rate_factor)
    except (TruncationError, ZeroProbabilityError) as exc:
        return SweepRow(g, v, input_error, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")


def _monotone(rows: Iterable[SweepRow], axis: str, other: tuple[str, str], increasing: bool, tol: float) -> bool:
    slices: dict[tuple, list[SweepRow]] = {}
    for r in rows:
        slices.setdefault(tuple(getattr(r, o) for o in other), []).append(r)
    for rs in slices.values():
        rs = sorted(rs, key=lambda r: getattr(r, axis))
        for metric in ("f_truth", "f_entangle"):
            vals = [getattr(r, metric) for r in rs]
            for x, y in zip(vals, vals[1:]):
                if (y < x - tol) if increasing else (y > x + tol):
                    return False
    return True


def fidelity_sweep(
    gs: Sequence[float],
    visibilities: Sequence[float],
    input_errors: Sequence[float] = (0.0,),
    n_pairs_max: int = 2,
    truncation: int = 8,
    tol: float = 1e-9,
) -> SweepTable:
    """Exact truth-table and entangling fidelities over a parameter grid."""
    rows = tuple(
        sweep_point(g, v, e, n_pairs_max, truncation)
        for g, v, e in itertools.product(gs, visibilities, input_errors)
    )
    ok = [r for r in rows if r.error is None]
    return SweepTable(
        rows=rows,
        monotone_in_g=_monotone(ok, "g", ("v", "input_error"), increasing=False, tol=tol),
        monotone_in_v=_monotone(ok, "v", ("g", "input_error"), increasing=True, tol=tol),
        truth_ge_entangle=all(r.f_truth >= r.f_entangle - tol for r in ok),
    )
