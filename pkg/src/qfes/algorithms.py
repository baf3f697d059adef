"""Circuit-level subroutines: QFT, phase estimation, amplitude amplification
and amplitude estimation, and observable estimation built on top of them.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .circuit import Circuit
from .gates import Gate, GateError, H as HADAMARD, check_unitary
from .state import StateError, StateVector, apply_gate, apply_operator

__all__ = [
    "qft_gates", "qft_circuit", "qft", "inverse_qft", "bit_reverse_permutation",
    "PhaseEstimate", "phase_estimation", "qpe_distribution",
    "OracleSpec", "GroverWalk", "grover_iterate", "optimal_iterations",
    "AmplitudeEstimate", "amplitude_estimate", "ae_error_bound",
    "ObservableEstimate", "estimate_observable",
]


# ---------------------------------------------------------------- QFT

def qft_gates(qubits: Sequence[int], swaps: bool = True) -> list[Gate]:
    """Gate list of the QFT on ``qubits`` (first entry most significant).

    n Hadamards, n(n-1)/2 controlled phase rotations R(2 pi / 2^k), and
    floor(n/2) final swaps unless ``swaps`` is False, in which case the
    output is bit-reversed (see :func:`bit_reverse_permutation`).
    """
    qubits = list(qubits)
    n = len(qubits)
    gates = []
    for k in range(n):
        gates.append(Gate("H", qubits[k]))
        for l in range(k + 1, n):
            gates.append(Gate("CR", qubits[k], qubits[l], angle=2 * np.pi / 2 ** (l - k + 1)))
    if swaps:
        for k in range(n // 2):
            gates.append(Gate("SWAP", (qubits[k], qubits[n - 1 - k])))
    return gates


def qft_circuit(n: int, swaps: bool = True) -> Circuit:
    if n < 1:
        raise ValueError("QFT needs n >= 1")
    return Circuit(n, qft_gates(range(n), swaps))


def bit_reverse_permutation(n: int) -> np.ndarray:
    """``perm[k]`` is the bit-reversal of ``k`` over ``n`` bits."""
    idx = np.arange(2 ** n)
    rev = np.zeros_like(idx)
    for b in range(n):
        rev |= ((idx >> b) & 1) << (n - 1 - b)
    return rev


def _apply_gates(state: StateVector, gates: Iterable[Gate]) -> StateVector:
    for g in gates:
        state = apply_gate(state, g)
    return state


def qft(state: StateVector, qubits: Sequence[int] | None = None,
        swaps: bool = True) -> StateVector:
    """``N^{-1/2} sum_jk e^{2 pi i jk/N} |k><j|`` applied through the gate circuit."""
    if qubits is None:
        qubits = range(state.n_qubits)
    return _apply_gates(state, qft_gates(qubits, swaps))


def inverse_qft(state: StateVector, qubits: Sequence[int] | None = None,
                swaps: bool = True) -> StateVector:
    if qubits is None:
        qubits = range(state.n_qubits)
    gates = [g.inverse() for g in reversed(qft_gates(qubits, swaps))]
    return _apply_gates(state, gates)


# ---------------------------------------------------------------- phase estimation

PowerApply = Callable[[np.ndarray, int], np.ndarray]


def _power_table(u: np.ndarray, m: int) -> list[np.ndarray]:
    """U^(2^j) for j = 0..m-1 by repeated squaring."""
    out = [u]
    for _ in range(m - 1):
        out.append(out[-1] @ out[-1])
    return out


def qpe_distribution(unitary: np.ndarray | PowerApply, state: StateVector | np.ndarray,
                     m_bits: int) -> np.ndarray:
    """Ancilla readout distribution of the phase-estimation circuit.

    The ancilla register (``m_bits`` qubits, most significant first) starts in
    |0>, receives Hadamards, then ancilla ``j`` controls ``U^(2^(m-1-j))`` on the
    system, and finally the inverse QFT.  For an eigenvector with eigenvalue
    ``e^{2 pi i y / 2^m}`` the register ends in ``|y>``.

    ``unitary`` is either a dense matrix or a callback ``f(vec, power)``
    returning ``U^power vec``.
    """
    if m_bits < 1:
        raise ValueError("m_bits must be >= 1")
    vec = state.amps if isinstance(state, StateVector) else np.asarray(state, dtype=complex)
    d = vec.size
    dims = (2,) * m_bits + (d,)
    reg = np.zeros((2 ** m_bits, d), dtype=complex)
    reg[0] = vec
    psi = StateVector(reg.ravel(), dims)
    for j in range(m_bits):
        psi = apply_operator(psi, HADAMARD, (j,))

    if callable(unitary):
        apply_power = unitary
        powers = None
    else:
        u = np.asarray(unitary, dtype=complex)
        if u.shape != (d, d):
            raise GateError(f"unitary shape {u.shape} does not match state dimension {d}")
        check_unitary(u)
        powers = _power_table(u, m_bits)

    for j in range(m_bits):
        p = m_bits - 1 - j
        if powers is not None:
            psi = apply_operator(psi, powers[p], (m_bits,), (j,))
        else:
            amps = psi.amps.reshape((2,) * m_bits + (d,)).copy()
            sel = (slice(None),) * j + (1,)
            block = amps[sel].reshape(-1, d)
            block = np.stack([apply_power(row, 2 ** p) for row in block])
            amps[sel] = block.reshape(amps[sel].shape)
            psi = StateVector(amps.ravel(), dims)

    psi = _apply_gates(psi, [g.inverse() for g in reversed(qft_gates(range(m_bits)))])
    probs = np.abs(psi.amps.reshape(2 ** m_bits, d)) ** 2
    return probs.sum(axis=1)


@dataclass
class PhaseEstimate:
    """Result of :func:`phase_estimation`.

    ``phase`` is in [0, 2 pi) for the convention ``U v = e^{i phase} v``;
    ``distribution`` is the full ancilla readout distribution and ``index``
    its mode.
    """

    phase: float
    index: int
    distribution: np.ndarray
    m_bits: int
    residual: float

    @property
    def bits(self) -> str:
        return format(self.index, f"0{self.m_bits}b")


def phase_estimation(unitary: np.ndarray | PowerApply, eigvec: StateVector | np.ndarray,
                     m_bits: int, residual_tol: float = 1e-8) -> PhaseEstimate:
    vec = eigvec.amps if isinstance(eigvec, StateVector) else np.asarray(eigvec, dtype=complex)
    uv = unitary(vec, 1) if callable(unitary) else np.asarray(unitary, dtype=complex) @ vec
    lam = np.vdot(vec, uv) / np.vdot(vec, vec)
    residual = float(np.linalg.norm(uv - lam * vec))
    if residual > residual_tol:
        warnings.warn(f"input is not an eigenvector of U (residual {residual:.2e})", stacklevel=2)
    dist = qpe_distribution(unitary, vec, m_bits)
    idx = int(np.argmax(dist))
    return PhaseEstimate(2 * np.pi * idx / 2 ** m_bits, idx, dist, m_bits, residual)


# ---------------------------------------------------------------- amplitude amplification

@dataclass
class OracleSpec:
    """Marks basis states; the oracle is ``diag((-1)^f(x))``."""

    dim: int
    marked: frozenset[int] = frozenset()
    f: Callable[[int], int] | None = None

    def __post_init__(self):
        if self.f is not None:
            self.marked = frozenset(x for x in range(self.dim) if self.f(x))
        self.marked = frozenset(int(x) for x in self.marked)
        bad = [x for x in self.marked if not 0 <= x < self.dim]
        if bad:
            raise ValueError(f"marked states {bad} outside [0, {self.dim})")

    def mask(self) -> np.ndarray:
        m = np.zeros(self.dim, dtype=bool)
        m[list(self.marked)] = True
        return m

    def signs(self) -> np.ndarray:
        return np.where(self.mask(), -1.0, 1.0)

    def matrix(self) -> np.ndarray:
        return np.diag(self.signs()).astype(complex)


@dataclass
class GroverWalk:
    """``G = O_s O_f`` with ``O_s = 2|s><s| - 1`` and ``|s> = A|0>``.

    ``prep`` may be given either as the unitary ``A`` or directly as the
    state ``|s>``; the default is the uniform superposition (Walsh-Hadamard).
    """

    oracle: OracleSpec
    prep: np.ndarray | StateVector | None = None
    s: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        d = self.oracle.dim
        if self.prep is None:
            s = np.full(d, d ** -0.5, dtype=complex)
        elif isinstance(self.prep, StateVector):
            s = self.prep.amps.copy()
        else:
            a = np.asarray(self.prep, dtype=complex)
            if a.ndim == 2:
                check_unitary(a)
                s = a[:, 0].copy()
            else:
                s = a / np.linalg.norm(a)
        if s.size != d:
            raise ValueError(f"preparation has dimension {s.size}, oracle {d}")
        self.s = s

    @property
    def dim(self) -> int:
        return self.oracle.dim

    @property
    def good_amplitude(self) -> float:
        """``sin(theta/2)`` for the initial state."""
        return float(np.linalg.norm(self.s[self.oracle.mask()]))

    @property
    def theta(self) -> float:
        return 2.0 * float(np.arcsin(min(self.good_amplitude, 1.0)))

    def apply(self, vec: np.ndarray) -> np.ndarray:
        v = self.oracle.signs() * vec
        return 2.0 * self.s * np.vdot(self.s, v) - v

    def apply_power(self, vec: np.ndarray, power: int) -> np.ndarray:
        for _ in range(power):
            vec = self.apply(vec)
        return vec

    def search_oracle(self) -> np.ndarray:
        return 2.0 * np.outer(self.s, self.s.conj()) - np.eye(self.dim)

    def matrix(self) -> np.ndarray:
        return self.search_oracle() @ self.oracle.matrix()


def grover_iterate(walk: GroverWalk, state: StateVector | None, k: int) -> StateVector:
    """Apply ``G^k``; ``state=None`` starts from ``|s>``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    vec = walk.s.copy() if state is None else state.amps.copy()
    vec = walk.apply_power(vec, k)
    return StateVector.from_amplitudes(vec, None if state is None else state.dims, normalize=False)


def optimal_iterations(walk: GroverWalk) -> int:
    """``round(pi/(2 theta) - 1/2)``."""
    th = walk.theta
    if th == 0:
        return 0
    return max(int(round(np.pi / (2 * th) - 0.5)), 0)


# ---------------------------------------------------------------- amplitude estimation

def ae_error_bound(m_bits: int) -> float:
    return np.pi / 2 ** m_bits + np.pi ** 2 / 2 ** (2 * m_bits)


@dataclass
class AmplitudeEstimate:
    estimate: float
    index: int
    distribution: np.ndarray
    m_bits: int

    @property
    def bound(self) -> float:
        return ae_error_bound(self.m_bits)


def amplitude_estimate(walk: GroverWalk, m_bits: int) -> AmplitudeEstimate:
    """Estimate ``sin^2(theta/2)`` by phase estimation of ``G`` on ``|s>``.

    ``|s>`` splits into the two eigenvectors of ``G`` with phases ``+theta``
    and ``-theta``; both readouts map to the same amplitude through
    ``sin^2(pi y / 2^m)``.
    """
    if m_bits < 1:
        raise ValueError("m_bits must be >= 1")
    if walk.dim <= 4096:
        unitary = walk.matrix()
    else:
        unitary = walk.apply_power
    dist = qpe_distribution(unitary, walk.s, m_bits)
    y = int(np.argmax(dist))
    est = float(np.sin(np.pi * y / 2 ** m_bits) ** 2)
    return AmplitudeEstimate(est, y, dist, m_bits)


@dataclass
class ObservableEstimate:
    """``value`` estimates ``<O>``; ``scale`` is the factor that maps the
    estimated ancilla amplitude ``sin^2`` back to ``<O>``."""

    value: float
    amplitude: AmplitudeEstimate
    scale: float
    exact: float

    @property
    def bound(self) -> float:
        return self.scale * self.amplitude.bound


def estimate_observable(psi: StateVector, observable, m_bits: int,
                        normalization: float | None = None) -> ObservableEstimate:
    """Estimate ``sum_x O(x) |psi(x)|^2`` with an ancilla rotation and QAE.

    The state prepared is ``N^{-1/2} sum_x |x> (phi'(x)|0> + phi(x)|1>)`` with
    ``phi = sqrt(O/c) psi`` and ``phi' = sqrt(1 - |phi|^2)``, so the marked
    (ancilla = 1) probability is ``<O>/(N c)``.  By default ``c`` is the
    smallest value keeping ``|phi| <= 1``, i.e. ``max_x O(x)|psi(x)|^2``.

    ``observable`` is an array of values per basis state or a callable.
    """
    amps = psi.amps
    d = amps.size
    if callable(observable):
        o = np.array([observable(x) for x in range(d)], dtype=float)
    else:
        o = np.asarray(observable, dtype=float).ravel()
    if o.size != d:
        raise ValueError(f"observable has {o.size} entries, state dimension is {d}")
    if np.any(o < 0):
        raise ValueError("observable must be non-negative")
    weight = o * np.abs(amps) ** 2
    exact = float(weight.sum())
    c = float(weight.max()) if normalization is None else float(normalization)
    if c <= 0:
        # <O> = 0 identically; nothing is marked
        c = 1.0
    phi = np.sqrt(o / c) * amps
    if np.any(np.abs(phi) > 1 + 1e-12):
        raise ValueError(f"|phi(x)| exceeds 1 with normalization {c:g}")
    phi_p = np.sqrt(np.clip(1 - np.abs(phi) ** 2, 0, None))
    s = np.empty(2 * d, dtype=complex)
    s[0::2] = phi_p / np.sqrt(d)
    s[1::2] = phi / np.sqrt(d)
    walk = GroverWalk(OracleSpec(2 * d, frozenset(range(1, 2 * d, 2))), s)
    ae = amplitude_estimate(walk, m_bits)
    scale = d * c
    return ObservableEstimate(ae.estimate * scale, ae, scale, exact)
