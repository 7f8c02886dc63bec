"""Dense state-vector and density-matrix engine for small polarization registers.

Ordering: qubit 0 is the most significant bit of the amplitude index, and
H maps to bit 0, V to bit 1, so ``|HV>`` sits at index 1 and kets print
left-to-right.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 8
EXACT_TOL = 1e-12
CHAIN_TOL = 1e-10
ZERO_PROB = 1e-14

_S = 1 / np.sqrt(2)

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
# Y = iXZ, so Y|H> = i|V>
Y = 1j * X @ Z
H = _S * np.array([[1, 1], [1, -1]], dtype=complex)

PAULI_MATRICES = {"I": I2, "X": X, "Y": Y, "Z": Z, "XZ": X @ Z}


class RegisterSizeError(ValueError):
    pass


class ZeroProbabilityError(ValueError):
    """Raised when conditioning on an outcome whose probability vanishes."""


def _check_size(n: int) -> None:
    if n < 0 or n > MAX_QUBITS:
        raise RegisterSizeError(f"register of {n} qubits exceeds cap of {MAX_QUBITS}")


@dataclass(frozen=True, eq=False)
class QubitState:
    """Pure state of ``n`` polarization qubits."""

    n: int
    amps: np.ndarray

    def __post_init__(self) -> None:
        _check_size(self.n)
        amps = np.asarray(self.amps, dtype=complex).reshape(-1)
        if amps.size != 2**self.n:
            raise ValueError(f"expected {2**self.n} amplitudes, got {amps.size}")
        amps = amps.copy()
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)

    @classmethod
    def from_amplitudes(cls, amps: Sequence[complex], normalize: bool = True) -> "QubitState":
        amps = np.asarray(amps, dtype=complex)
        n = int(round(np.log2(amps.size)))
        if 2**n != amps.size:
            raise ValueError("amplitude vector length must be a power of two")
        if normalize:
            norm = np.linalg.norm(amps)
            if norm < ZERO_PROB:
                raise ZeroProbabilityError("cannot normalize the zero vector")
            amps = amps / norm
        return cls(n, amps)

    @classmethod
    def from_label(cls, label: str) -> "QubitState":
        """Product state from a string over ``H V + - L R``, e.g. ``"H+"``."""
        single = {
            "H": np.array([1, 0], dtype=complex),
            "V": np.array([0, 1], dtype=complex),
            "+": _S * np.array([1, 1], dtype=complex),
            "-": _S * np.array([1, -1], dtype=complex),
            "L": _S * np.array([1, 1j], dtype=complex),
            "R": _S * np.array([1, -1j], dtype=complex),
        }
        try:
            vecs = [single[c] for c in label]
        except KeyError as exc:
            raise ValueError(f"unknown polarization symbol {exc.args[0]!r}") from None
        out = np.array([1], dtype=complex)
        for v in vecs:
            out = np.kron(out, v)
        return cls(len(label), out)

    @property
    def dim(self) -> int:
        return 2**self.n

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def tensor_array(self) -> np.ndarray:
        return self.amps.reshape((2,) * self.n)

    def __repr__(self) -> str:
        return f"QubitState(n={self.n}, {ket_string(self)})"


def ket_string(s: QubitState, tol: float = 1e-9) -> str:
    parts = []
    for idx, a in enumerate(s.amps):
        if abs(a) > tol:
            bits = format(idx, f"0{s.n}b") if s.n else ""
            label = bits.replace("0", "H").replace("1", "V")
            parts.append(f"({a.real:+.4f}{a.imag:+.4f}j)|{label}>")
    return " ".join(parts) if parts else "0"


def basis_state(bits: Sequence[int]) -> QubitState:
    n = len(bits)
    amps = np.zeros(2**n, dtype=complex)
    amps[int("".join(str(int(b)) for b in bits) or "0", 2)] = 1
    return QubitState(n, amps)


def random_state(n: int, rng: np.random.Generator) -> QubitState:
    v = rng.normal(size=2**n) + 1j * rng.normal(size=2**n)
    return QubitState.from_amplitudes(v)


def tensor(a: QubitState, b: QubitState) -> QubitState:
    _check_size(a.n + b.n)
    return QubitState(a.n + b.n, np.kron(a.amps, b.amps))


def overlap(a: QubitState, b: QubitState) -> complex:
    if a.n != b.n:
        raise ValueError("size mismatch")
    return complex(np.vdot(a.amps, b.amps))


def same_up_to_phase(a: QubitState, b: QubitState, tol: float = CHAIN_TOL) -> bool:
    return abs(abs(overlap(a, b)) ** 2 - 1) < tol


def apply_matrix(s: QubitState, mat: np.ndarray, targets: Sequence[int]) -> QubitState:
    """Apply a ``2^k x 2^k`` operator to the listed qubits (first = most significant)."""
    targets = list(targets)
    k = len(targets)
    if len(set(targets)) != k:
        raise ValueError(f"target qubits must be distinct, got {targets}")
    for t in targets:
        if not 0 <= t < s.n:
            raise IndexError(f"qubit {t} out of range for {s.n}-qubit register")
    mat = np.asarray(mat, dtype=complex)
    if mat.shape != (2**k, 2**k):
        raise ValueError(f"operator shape {mat.shape} does not match {k} targets")
    psi = np.moveaxis(s.tensor_array(), targets, range(k))
    rest = psi.shape[k:]
    psi = (mat @ psi.reshape(2**k, -1)).reshape((2,) * k + rest)
    psi = np.moveaxis(psi, range(k), targets)
    return QubitState(s.n, psi.reshape(-1))


# control first, target second
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

GATES = {"X": X, "Y": Y, "Z": Z, "H": H, "I": I2, "CNOT": CNOT}


def apply_gate(s: QubitState, gate: str, targets: int | Sequence[int]) -> QubitState:
    """Apply a named gate.

    For ``"CNOT"`` the targets are ``(control, target)``; the target flips when
    the control is V.
    """
    if isinstance(targets, (int, np.integer)):
        targets = [int(targets)]
    try:
        mat = GATES[gate]
    except KeyError:
        raise ValueError(f"unknown gate {gate!r}") from None
    return apply_matrix(s, mat, targets)


def cnot_matrix(n: int, control: int, target: int) -> np.ndarray:
    """Full ``2^n`` matrix of a C-NOT; used by oracles that want explicit matrices."""
    dim = 2**n
    mat = np.zeros((dim, dim), dtype=complex)
    for idx in range(dim):
        bits = [(idx >> (n - 1 - q)) & 1 for q in range(n)]
        if bits[control]:
            bits[target] ^= 1
        out = int("".join(map(str, bits)), 2)
        mat[out, idx] = 1
    return mat


class BellKind(enum.Enum):
    PHI_PLUS = "Phi+"
    PHI_MINUS = "Phi-"
    PSI_PLUS = "Psi+"
    PSI_MINUS = "Psi-"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, text: str) -> "BellKind":
        for k in cls:
            if text in (k.value, k.name):
                return k
        raise ValueError(f"unknown Bell state {text!r}")


_BELL_AMPS = {
    BellKind.PHI_PLUS: [_S, 0, 0, _S],
    BellKind.PHI_MINUS: [_S, 0, 0, -_S],
    BellKind.PSI_PLUS: [0, _S, _S, 0],
    BellKind.PSI_MINUS: [0, _S, -_S, 0],
}


def bell_state(kind: BellKind) -> QubitState:
    return QubitState(2, np.array(_BELL_AMPS[kind], dtype=complex))


def _split_pair(s: QubitState, pair: tuple[int, int]) -> tuple[np.ndarray, list[int]]:
    a, b = pair
    if a == b:
        raise ValueError("Bell pair must name two distinct qubits")
    for q in pair:
        if not 0 <= q < s.n:
            raise IndexError(f"qubit {q} out of range for {s.n}-qubit register")
    rest = [q for q in range(s.n) if q not in pair]
    psi = np.moveaxis(s.tensor_array(), [a, b], [0, 1]).reshape(4, -1)
    return psi, rest


def project_bell(
    s: QubitState, pair: tuple[int, int], kind: BellKind
) -> tuple[float, QubitState | None]:
    """Project ``pair`` onto a Bell state.

    Returns the outcome probability and the renormalized state of the other
    qubits in their original order. A vanishing outcome yields ``(0.0, None)``.
    """
    psi, rest = _split_pair(s, pair)
    rem = bell_state(kind).amps.conj() @ psi
    prob = float(np.vdot(rem, rem).real)
    if prob < ZERO_PROB:
        return 0.0, None
    return prob, QubitState(len(rest), rem / np.sqrt(prob))


def bell_decompose(s: QubitState, pair: tuple[int, int]) -> list[tuple[BellKind, float, QubitState | None]]:
    return [(k, *project_bell(s, pair, k)) for k in BellKind]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n: int
    mat: np.ndarray

    def __post_init__(self) -> None:
        _check_size(self.n)
        mat = np.array(self.mat, dtype=complex)
        if mat.shape != (2**self.n, 2**self.n):
            raise ValueError(f"density matrix shape {mat.shape} does not match n={self.n}")
        mat.setflags(write=False)
        object.__setattr__(self, "mat", mat)

    @classmethod
    def from_state(cls, s: QubitState) -> "DensityMatrix":
        return cls(s.n, np.outer(s.amps, s.amps.conj()))

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(n, np.eye(2**n) / 2**n)

    @classmethod
    def mixture(cls, weighted: Iterable[tuple[float, "DensityMatrix"]]) -> "DensityMatrix":
        items = list(weighted)
        total = sum(w for w, _ in items)
        if total <= 0:
            raise ZeroProbabilityError("mixture has no weight")
        mat = sum(w * r.mat for w, r in items) / total
        return cls(items[0][1].n, mat)

    def trace(self) -> float:
        return float(np.trace(self.mat).real)

    def is_valid(self, tol: float = CHAIN_TOL) -> bool:
        herm = np.allclose(self.mat, self.mat.conj().T, atol=tol)
        eig = np.linalg.eigvalsh((self.mat + self.mat.conj().T) / 2)
        return bool(herm and abs(self.trace() - 1) < tol and eig.min() >= -tol)

    def probabilities(self) -> np.ndarray:
        return np.clip(np.diag(self.mat).real, 0.0, None)


def random_density_matrix(n: int, rng: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    dim = 2**n
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return DensityMatrix(n, rho / np.trace(rho).real)


def partial_trace(rho: DensityMatrix, keep: Sequence[int]) -> DensityMatrix:
    keep = list(keep)
    n = rho.n
    drop = [q for q in range(n) if q not in keep]
    t = rho.mat.reshape((2,) * (2 * n))
    t = np.moveaxis(t, keep + drop + [n + q for q in keep] + [n + q for q in drop], range(2 * n))
    k, d = 2 ** len(keep), 2 ** len(drop)
    t = t.reshape(k, d, k, d)
    return DensityMatrix(len(keep), np.einsum("ajbj->ab", t))


@dataclass(frozen=True)
class PauliString:
    """Tensor product of single-qubit operators, one label per qubit.

    Labels are ``I X Y Z`` plus ``XZ`` for the product X·Z (= -iY), which
    is how branch corrections are written.
    """

    ops: tuple[str, ...]

    def __post_init__(self) -> None:
        ops = tuple(self.ops)
        for op in ops:
            if op not in PAULI_MATRICES:
                raise ValueError(f"unknown Pauli label {op!r}")
        object.__setattr__(self, "ops", ops)

    @classmethod
    def parse(cls, text: str) -> "PauliString":
        """``"XZ,I"`` or ``"XX"`` (single-letter labels without separators)."""
        if "," in text:
            return cls(tuple(t.strip() for t in text.split(",")))
        return cls(tuple(text))

    def __len__(self) -> int:
        return len(self.ops)

    def __str__(self) -> str:
        return "⊗".join(self.ops)

    def matrix(self) -> np.ndarray:
        out = np.array([[1]], dtype=complex)
        for op in self.ops:
            out = np.kron(out, PAULI_MATRICES[op])
        return out

    def apply(self, s: QubitState) -> QubitState:
        if len(self) != s.n:
            raise ValueError(f"Pauli string of length {len(self)} on {s.n}-qubit state")
        for q, op in enumerate(self.ops):
            if op != "I":
                s = apply_matrix(s, PAULI_MATRICES[op], [q])
        return s

    def conjugate(self, rho: DensityMatrix) -> DensityMatrix:
        if len(self) != rho.n:
            raise ValueError(f"Pauli string of length {len(self)} on {rho.n}-qubit state")
        m = self.matrix()
        return DensityMatrix(rho.n, m @ rho.mat @ m.conj().T)


def expectation(rho: DensityMatrix, p: PauliString) -> float:
    if len(p) != rho.n:
        raise ValueError(f"Pauli string of length {len(p)} on {rho.n}-qubit state")
    val = np.trace(rho.mat @ p.matrix())
    if abs(val.imag) > CHAIN_TOL and "XZ" not in p.ops:
        raise ValueError(f"non-real expectation {val} for a Hermitian observable")
    return float(val.real)


def fidelity_pure(rho: DensityMatrix, target: QubitState) -> float:
    if rho.n != target.n:
        raise ValueError(f"size mismatch: rho has {rho.n} qubits, target {target.n}")
    f = np.vdot(target.amps, rho.mat @ target.amps).real
    if f < -CHAIN_TOL or f > 1 + CHAIN_TOL:
        raise ValueError(f"fidelity {f} outside [0, 1]; rho is not a valid state")
    return float(min(max(f, 0.0), 1.0))
