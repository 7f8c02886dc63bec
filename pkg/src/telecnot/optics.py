"""Truncated Fock-space optics over polarized spatial modes.

A state is a sparse map from occupation vectors to amplitudes. Every optical
element is a linear map on creation operators,

    a_in^dagger -> sum_out M[out, in] a_out^dagger,

expanded term by term. Photon number is conserved by every element, so the
truncation can only be exceeded where photons are created (sources, tensor
products); exceeding it raises instead of clipping.

Slots carry an optional ``tag``: an internal label (e.g. arrival time) that
optical elements ignore but which makes photons distinguishable. Detection
helpers sum over tags.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .qstate import QubitState, ZERO_PROB

POLS = ("H", "V")
DEFAULT_N_MAX = 6
_DROP = 1e-15


class TruncationError(ValueError):
    pass


class RepresentationError(ValueError):
    pass


class ModeLabel(NamedTuple):
    spatial: str
    pol: str
    tag: str = ""

    def __str__(self) -> str:
        return f"{self.pol}_{self.spatial}" + (f"[{self.tag}]" if self.tag else "")


Occupation = tuple[int, ...]


@dataclass(frozen=True, eq=False)
class OpticalState:
    """Superposition of Fock occupations; may be sub-normalized after post-selection."""

    modes: tuple[ModeLabel, ...]
    terms: Mapping[Occupation, complex]
    n_max: int = DEFAULT_N_MAX

    def __post_init__(self) -> None:
        modes = tuple(ModeLabel(*m) for m in self.modes)
        if len(set(modes)) != len(modes):
            raise ValueError("duplicate mode slots")
        for m in modes:
            if m.pol not in POLS:
                raise ValueError(f"polarization must be H or V, got {m.pol!r}")
        terms = {}
        for occ, amp in self.terms.items():
            occ = tuple(int(c) for c in occ)
            if len(occ) != len(modes):
                raise ValueError("occupation vector length does not match modes")
            if min(occ, default=0) < 0:
                raise ValueError("negative occupation")
            if sum(occ) > self.n_max:
                raise TruncationError(
                    f"term with {sum(occ)} photons exceeds truncation n_max={self.n_max}"
                )
            if abs(amp) > _DROP:
                terms[occ] = complex(amp)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def _trusted(cls, modes: tuple[ModeLabel, ...], terms: dict, n_max: int) -> "OpticalState":
        # internal results of photon-number-conserving maps skip re-validation
        obj = object.__new__(cls)
        object.__setattr__(obj, "modes", modes)
        object.__setattr__(obj, "terms", {k: v for k, v in terms.items() if abs(v) > _DROP})
        object.__setattr__(obj, "n_max", n_max)
        return obj

    @classmethod
    def vacuum(cls, spatial: Iterable[str] = (), n_max: int = DEFAULT_N_MAX) -> "OpticalState":
        modes = tuple(ModeLabel(sp, p) for sp in spatial for p in POLS)
        return cls(modes, {(0,) * len(modes): 1.0}, n_max)

    @property
    def spatial_modes(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for m in self.modes:
            seen.setdefault(m.spatial, None)
        return tuple(seen)

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def normalized(self) -> "OpticalState":
        nrm = math.sqrt(self.norm_sq())
        if nrm < math.sqrt(ZERO_PROB):
            raise ValueError("cannot normalize an empty optical state")
        return OpticalState._trusted(self.modes, {k: v / nrm for k, v in self.terms.items()}, self.n_max)

    def amplitude(self, occupied: Mapping[ModeLabel | tuple, int]) -> complex:
        """Amplitude of the term with the given nonzero occupations."""
        idx = {m: i for i, m in enumerate(self.modes)}
        occ = [0] * len(self.modes)
        for m, c in occupied.items():
            occ[idx[ModeLabel(*m)]] = c
        return self.terms.get(tuple(occ), 0.0)

    def with_modes(self, *spatial: str, tags: Sequence[str] = ("",)) -> "OpticalState":
        """Register vacuum slots for the given spatial modes."""
        new = [
            ModeLabel(sp, p, t)
            for sp in spatial
            for t in tags
            for p in POLS
            if ModeLabel(sp, p, t) not in self.modes
        ]
        return self._extended(new)

    def with_n_max(self, n_max: int) -> "OpticalState":
        return OpticalState(self.modes, self.terms, n_max)

    def _extended(self, new: Sequence[ModeLabel]) -> "OpticalState":
        if not new:
            return self
        if set(new) & set(self.modes):
            raise ValueError("slot already registered")
        pad = (0,) * len(new)
        return OpticalState._trusted(
            self.modes + tuple(ModeLabel(*m) for m in new),
            {k + pad: v for k, v in self.terms.items()},
            self.n_max,
        )

    def photon_counts(self, occ: Occupation) -> dict[str, int]:
        """Photons per spatial mode, summed over polarization and tag."""
        out: dict[str, int] = {}
        for m, c in zip(self.modes, occ):
            out[m.spatial] = out.get(m.spatial, 0) + c
        return out

    def retagged(self, spatial: str, tag: str) -> "OpticalState":
        """Move every photon of ``spatial`` onto slots carrying ``tag``."""
        new_modes = tuple(
            m._replace(tag=tag) if m.spatial == spatial else m for m in self.modes
        )
        if len(set(new_modes)) != len(new_modes):
            raise ValueError(f"mode {spatial} already carries several tags")
        return OpticalState._trusted(new_modes, self.terms, self.n_max)

    def pretty(self, tol: float = 1e-9) -> str:
        lines = []
        for occ, amp in sorted(self.terms.items()):
            if abs(amp) < tol:
                continue
            ket = " ".join(
                (f"{m}" if c == 1 else f"{m}^{c}") for m, c in zip(self.modes, occ) if c
            ) or "vac"
            lines.append(f"({amp.real:+.6f}{amp.imag:+.6f}j) |{ket}>")
        return "\n".join(lines)


def tensor_optical(a: OpticalState, b: OpticalState, n_max: int | None = None) -> OpticalState:
    if set(a.modes) & set(b.modes):
        raise ValueError("states share mode slots; cannot form a tensor product")
    n_max = max(a.n_max, b.n_max) if n_max is None else n_max
    terms = {}
    for oa, va in a.terms.items():
        for ob, vb in b.terms.items():
            if sum(oa) + sum(ob) > n_max:
                raise TruncationError(
                    f"tensor product term with {sum(oa) + sum(ob)} photons exceeds n_max={n_max}"
                )
            terms[oa + ob] = va * vb
    return OpticalState(a.modes + b.modes, terms, n_max)


# ---------------------------------------------------------------------------
# linear-optical elements


def apply_linear(
    s: OpticalState,
    columns: Mapping[ModeLabel, Sequence[tuple[ModeLabel, complex]]],
) -> OpticalState:
    """Rewrite creation operators of the listed input slots.

    ``columns[in_slot]`` lists ``(out_slot, coefficient)`` pairs. Input slots
    that do not reappear as outputs are removed from the mode list.
    """
    columns = {ModeLabel(*k): [(ModeLabel(*o), complex(c)) for o, c in v] for k, v in columns.items()}
    for slot in columns:
        if slot not in s.modes:
            raise KeyError(f"slot {slot} not present in state")
    outs: dict[ModeLabel, None] = {}
    for v in columns.values():
        for o, _ in v:
            outs.setdefault(o, None)
    s = s._extended([o for o in outs if o not in s.modes])
    idx = {m: i for i, m in enumerate(s.modes)}
    in_idx = [idx[k] for k in columns]
    col_idx = [[(idx[o], c) for o, c in columns[k]] for k in columns]

    cache: dict[Occupation, list[tuple[dict[int, int], complex]]] = {}

    def expand(sub: Occupation) -> list[tuple[dict[int, int], complex]]:
        poly: dict[tuple[tuple[int, int], ...], complex] = {(): 1.0 + 0j}
        scale = 1.0
        for k, n in enumerate(sub):
            scale /= math.sqrt(math.factorial(n))
            for _ in range(n):
                nxt: dict[tuple[tuple[int, int], ...], complex] = {}
                for mono, coeff in poly.items():
                    for j, c in col_idx[k]:
                        d = dict(mono)
                        d[j] = d.get(j, 0) + 1
                        key = tuple(sorted(d.items()))
                        nxt[key] = nxt.get(key, 0) + coeff * c
                poly = nxt
        out = []
        for mono, coeff in poly.items():
            amp = coeff * scale
            for _, m in mono:
                amp *= math.sqrt(math.factorial(m))
            if abs(amp) > _DROP:
                out.append((dict(mono), amp))
        return out

    terms: dict[Occupation, complex] = {}
    for occ, amp in s.terms.items():
        sub = tuple(occ[i] for i in in_idx)
        if not any(sub):
            terms[occ] = terms.get(occ, 0) + amp
            continue
        if sub not in cache:
            cache[sub] = expand(sub)
        base = list(occ)
        for i in in_idx:
            base[i] = 0
        for delta, c in cache[sub]:
            new = base.copy()
            for j, m in delta.items():
                new[j] += m
            key = tuple(new)
            terms[key] = terms.get(key, 0) + amp * c
    out = OpticalState._trusted(s.modes, terms, s.n_max)
    consumed = [m for m in columns if m not in outs]
    return _drop_slots(out, consumed)


def _drop_slots(s: OpticalState, slots: Sequence[ModeLabel]) -> OpticalState:
    if not slots:
        return s
    drop = {s.modes.index(m) for m in slots}
    keep = [i for i in range(len(s.modes)) if i not in drop]
    terms: dict[Occupation, complex] = {}
    for occ, amp in s.terms.items():
        if any(occ[i] for i in drop):
            raise RuntimeError("attempted to drop an occupied slot")
        key = tuple(occ[i] for i in keep)
        terms[key] = terms.get(key, 0) + amp
    return OpticalState._trusted(tuple(s.modes[i] for i in keep), terms, s.n_max)


def _tags(s: OpticalState, spatial: Iterable[str]) -> list[str]:
    spatial = set(spatial)
    present = {m.spatial for m in s.modes}
    missing = spatial - present
    if missing:
        raise KeyError(f"spatial modes {sorted(missing)} not present in state")
    return sorted({m.tag for m in s.modes if m.spatial in spatial})


def apply_mode_unitary(
    s: OpticalState,
    in_modes: Sequence[str],
    matrix: np.ndarray,
    out_modes: Sequence[str] | None = None,
) -> OpticalState:
    """Apply a unitary on the ``(spatial, pol)`` slots of ``in_modes``.

    Slots are ordered spatial-major: ``[(m0,H), (m0,V), (m1,H), ...]``.
    ``matrix[out, in]`` is the amplitude for an input photon to leave in an
    output slot. Every tag is transformed identically.
    """
    in_modes = list(in_modes)
    out_modes = list(out_modes) if out_modes is not None else in_modes
    if len(out_modes) != len(in_modes) or len(set(in_modes)) != len(in_modes):
        raise ValueError("in/out mode lists must be distinct and of equal length")
    clash = set(out_modes) - set(in_modes)
    clash &= {m.spatial for m in s.modes}
    if clash:
        raise ValueError(f"output modes {sorted(clash)} already exist in state")
    matrix = np.asarray(matrix, dtype=complex)
    k = 2 * len(in_modes)
    if matrix.shape != (k, k):
        raise ValueError(f"expected {k}x{k} mode matrix, got {matrix.shape}")
    ins = [(sp, p) for sp in in_modes for p in POLS]
    outs = [(sp, p) for sp in out_modes for p in POLS]
    columns = {}
    for tag in _tags(s, in_modes):
        for c, (sp, p) in enumerate(ins):
            slot = ModeLabel(sp, p, tag)
            if slot not in s.modes:
                s = s._extended([slot])
            columns[slot] = [
                (ModeLabel(osp, op, tag), matrix[r, c])
                for r, (osp, op) in enumerate(outs)
                if abs(matrix[r, c]) > 0
            ]
    return apply_linear(s, columns)


@dataclass(frozen=True)
class PdbsSpec:
    """Polarization-dependent beam splitter, given by intensity transmissions.

    Reflection amplitudes follow from unitarity and carry a phase ``i``.
    """

    T_H: float
    T_V: float
    t_h: float = field(init=False)
    t_v: float = field(init=False)

    def __post_init__(self) -> None:
        for T in (self.T_H, self.T_V):
            if not 0.0 <= T <= 1.0:
                raise ValueError(f"transmission {T} outside [0, 1]")
        object.__setattr__(self, "t_h", math.sqrt(self.T_H))
        object.__setattr__(self, "t_v", math.sqrt(self.T_V))

    @property
    def r_h(self) -> float:
        return math.sqrt(1.0 - self.T_H)

    @property
    def r_v(self) -> float:
        return math.sqrt(1.0 - self.T_V)

    def amplitudes(self, pol: str) -> tuple[float, float]:
        return (self.t_h, self.r_h) if pol == "H" else (self.t_v, self.r_v)


PDBS = PdbsSpec(T_H=1.0, T_V=1 / 3)
PDBS_PRIME = PdbsSpec(T_H=1 / 3, T_V=1.0)
BS_50_50 = PdbsSpec(T_H=0.5, T_V=0.5)


def beamsplitter_matrix(spec: PdbsSpec) -> np.ndarray:
    """Slot order ``[aH, aV, bH, bV]``; output ``a`` is the transmitted line of input ``a``."""
    m = np.zeros((4, 4), dtype=complex)
    for k, pol in enumerate(POLS):
        t, r = spec.amplitudes(pol)
        a, b = k, 2 + k
        m[a, a] = t
        m[b, a] = 1j * r
        m[b, b] = t
        m[a, b] = 1j * r
    return m


def apply_beamsplitter(
    s: OpticalState,
    in_modes: tuple[str, str],
    spec: PdbsSpec,
    out_modes: tuple[str, str] | None = None,
) -> OpticalState:
    return apply_mode_unitary(s, in_modes, beamsplitter_matrix(spec), out_modes)


def pbs_matrix() -> np.ndarray:
    """H transmits; V reflects into the other port with phase ``i``."""
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = m[2, 2] = 1
    m[3, 1] = m[1, 3] = 1j
    return m


def apply_pbs(
    s: OpticalState, in_modes: tuple[str, str], out_modes: tuple[str, str] | None = None
) -> OpticalState:
    return apply_mode_unitary(s, in_modes, pbs_matrix(), out_modes)


def hwp_matrix(theta_deg: float) -> np.ndarray:
    c, sn = math.cos(math.radians(2 * theta_deg)), math.sin(math.radians(2 * theta_deg))
    return np.array([[c, sn], [sn, -c]], dtype=complex)


def apply_jones(s: OpticalState, mode: str, jones: np.ndarray) -> OpticalState:
    """Apply a 2x2 Jones matrix acting on ``(H, V)`` amplitude columns."""
    return apply_mode_unitary(s, [mode], np.asarray(jones, dtype=complex))


def apply_hwp(s: OpticalState, mode: str, theta: float) -> OpticalState:
    return apply_jones(s, mode, hwp_matrix(theta))


def apply_phase(s: OpticalState, mode: str, phi: float) -> OpticalState:
    """Birefringent retarder: ``V -> exp(i phi) V``."""
    return apply_jones(s, mode, np.diag([1.0, np.exp(1j * phi)]))


def apply_polarizer(s: OpticalState, mode: str, loss_mode: str, passes: str = "H") -> OpticalState:
    """Transmit ``passes`` polarization; the orthogonal one is dumped into ``loss_mode``."""
    if passes not in POLS:
        raise ValueError(f"polarizer axis must be H or V, got {passes!r}")
    s = s.with_modes(loss_mode, tags=_tags(s, [mode]))
    keep = POLS.index(passes)
    m = np.zeros((4, 4), dtype=complex)
    m[keep, keep] = 1
    m[2 + 1 - keep, 1 - keep] = 1
    m[1 - keep, 2 + 1 - keep] = 1
    m[2 + keep, 2 + keep] = 1
    return apply_mode_unitary(s, [mode, loss_mode], m)


# ---------------------------------------------------------------------------
# sources


def _create(terms: Mapping[Occupation, complex], i: int) -> dict[Occupation, complex]:
    out: dict[Occupation, complex] = {}
    for occ, amp in terms.items():
        new = list(occ)
        new[i] += 1
        out[tuple(new)] = out.get(tuple(new), 0) + amp * math.sqrt(new[i])
    return out


def pair_operator_power(modes: tuple[str, str], n: int, n_max: int = DEFAULT_N_MAX) -> OpticalState:
    """Normalized ``(a_H^† b_H^† + a_V^† b_V^†)^n |0>``: exactly ``n`` entangled pairs."""
    if 2 * n > n_max:
        raise TruncationError(f"{n} pairs need {2 * n} photons; n_max={n_max}")
    s = OpticalState.vacuum(modes, n_max)
    terms = dict(s.terms)
    for _ in range(n):
        nxt: dict[Occupation, complex] = {}
        for a, b in ((0, 2), (1, 3)):
            for k, v in _create(_create(terms, a), b).items():
                nxt[k] = nxt.get(k, 0) + v
        terms = nxt
    return OpticalState(s.modes, terms, n_max).normalized()


def pair_weights(g: float, n_pairs_max: int) -> list[float]:
    """Unnormalized probabilities of emitting ``n`` pairs from ``exp(g K^†)|0>``."""
    weights = []
    for n in range(n_pairs_max + 1):
        # ||K^†^n |0>||^2 = (n!)^2 (n + 1)
        weights.append(g ** (2 * n) * (n + 1))
    return weights


def spdc_source(
    modes: tuple[str, str], g: float, n_pairs_max: int, n_max: int = DEFAULT_N_MAX
) -> OpticalState:
    """Truncated two-mode-squeezed polarization source, normalized.

    Sum over ``n <= n_pairs_max`` of ``g^n K^†^n / n! |0>`` with
    ``K^† = a_H^† b_H^† + a_V^† b_V^†``.
    """
    if g < 0:
        raise ValueError("pair parameter g must be non-negative")
    if n_pairs_max not in (1, 2):
        raise ValueError("n_pairs_max must be 1 or 2")
    weights = pair_weights(g, n_pairs_max)
    terms: dict[Occupation, complex] = {}
    modes_out = None
    for n, w in enumerate(weights):
        comp = pair_operator_power(modes, n, n_max)
        modes_out = comp.modes
        for k, v in comp.terms.items():
            terms[k] = terms.get(k, 0) + math.sqrt(w) * v
    return OpticalState(modes_out, terms, n_max).normalized()


# ---------------------------------------------------------------------------
# detection and conversion


def postselect(s: OpticalState, spatial: Sequence[str]) -> tuple[float, OpticalState | None]:
    """Keep terms with exactly one photon in each listed mode and none elsewhere."""
    _tags(s, spatial)
    wanted = set(spatial)
    kept = {}
    for occ, amp in s.terms.items():
        counts = s.photon_counts(occ)
        if all(counts.get(sp, 0) == (1 if sp in wanted else 0) for sp in counts):
            kept[occ] = amp
    prob = float(sum(abs(a) ** 2 for a in kept.values()))
    if prob < ZERO_PROB:
        return 0.0, None
    return prob, OpticalState(s.modes, kept, s.n_max).normalized()


def to_qubit_state(s: OpticalState, mode_order: Sequence[str]) -> QubitState:
    """Read one photon per listed mode as a qubit (H -> 0, V -> 1)."""
    mode_order = list(mode_order)
    n = len(mode_order)
    amps = np.zeros(2**n, dtype=complex)
    filled: dict[int, tuple] = {}
    pos = {sp: q for q, sp in enumerate(mode_order)}
    for occ, amp in s.terms.items():
        bits = [None] * n
        tags = []
        for m, c in zip(s.modes, occ):
            if not c:
                continue
            if m.spatial not in pos or c != 1 or bits[pos[m.spatial]] is not None:
                raise RepresentationError(f"term {occ} is not one photon per listed mode")
            bits[pos[m.spatial]] = POLS.index(m.pol)
            tags.append(m.tag)
        if any(b is None for b in bits):
            raise RepresentationError(f"term {occ} leaves a listed mode empty")
        idx = int("".join(map(str, bits)), 2) if n else 0
        if idx in filled and filled[idx] != tuple(tags):
            raise RepresentationError("distinguishable photons cannot form a pure qubit state")
        filled[idx] = tuple(tags)
        amps[idx] += amp
    return QubitState(n, amps)


def from_qubit_state(q: QubitState, mode_order: Sequence[str], n_max: int = DEFAULT_N_MAX) -> OpticalState:
    mode_order = list(mode_order)
    if len(mode_order) != q.n:
        raise ValueError("one spatial mode per qubit required")
    modes = tuple(ModeLabel(sp, p) for sp in mode_order for p in POLS)
    terms = {}
    for idx, amp in enumerate(q.amps):
        if abs(amp) < _DROP:
            continue
        occ = [0] * len(modes)
        for k in range(q.n):
            bit = (idx >> (q.n - 1 - k)) & 1
            occ[2 * k + bit] = 1
        terms[tuple(occ)] = amp
    return OpticalState(modes, terms, n_max)
