"""Open-system evolution: GKLS integration, Kraus channels and a
gate-based noise model for circuits.

Qubit collapse-operator conventions (rate ``nu``):

* relaxation  ``L = sigma_-  = |0><1|``
* excitation  ``L = sigma_+  = |1><0|``
* dephasing   ``L = sigma_z / sqrt(2)``  (coherences decay as ``exp(-nu t)``)
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .circuit import Circuit
from .gates import Gate
from .state import DensityMatrix, StateError, StateVector, apply_gate, fidelity

__all__ = [
    "SIGMA_MINUS", "SIGMA_PLUS", "DEPHASE",
    "LindbladModel", "QuantumChannel", "GateNoiseProfile",
    "StepTooLarge", "PositivityError", "ChannelError",
    "generator_norm", "gkls_rhs", "gkls_step", "gkls_evolve", "gkls_superoperator",
    "apply_channel", "depolarizing_channel", "dephasing_channel", "amplitude_damping_channel",
    "embed_operator", "NoisyRun", "noisy_circuit_run",
]

SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.T.copy()
DEPHASE = np.diag([1.0, -1.0]).astype(complex) / np.sqrt(2)

STEP_GUARD = 0.1


class StepTooLarge(ValueError):
    pass


class PositivityError(StateError):
    pass


class ChannelError(ValueError):
    pass


@dataclass
class LindbladModel:
    """Hamiltonian plus diagonal-form collapse terms ``(L_alpha, nu_alpha)``.

    Energies are in units with hbar = 1 unless ``hbar`` is set.
    """

    H: np.ndarray
    collapse: list[tuple[np.ndarray, float]] = field(default_factory=list)
    hbar: float = 1.0

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=complex)
        d = self.H.shape[0]
        herm = np.max(np.abs(self.H - self.H.conj().T)) if d else 0.0
        if herm > 1e-12:
            raise ValueError(f"Hamiltonian is not Hermitian ({herm:.2e})")
        terms = []
        for L, nu in self.collapse:
            L = np.asarray(L, dtype=complex)
            if L.shape != (d, d):
                raise ValueError(f"collapse operator shape {L.shape} != {(d, d)}")
            if nu < 0:
                raise ValueError(f"negative rate {nu}: not completely positive")
            terms.append((L, float(nu)))
        self.collapse = terms

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @classmethod
    def from_rate_matrix(cls, H, operators: Sequence[np.ndarray], rates: np.ndarray,
                         hbar: float = 1.0, tol: float = 1e-12) -> "LindbladModel":
        """Build the diagonal form from a general Hermitian rate matrix.

        ``sum_jk gamma_jk F_j rho F_k^dag`` becomes ``sum_a nu_a L_a rho L_a^dag``
        with ``gamma = U diag(nu) U^dag`` and ``L_a = sum_j U_ja F_j``.
        """
        gamma = np.asarray(rates, dtype=complex)
        if np.max(np.abs(gamma - gamma.conj().T)) > 1e-12:
            raise ValueError("rate matrix must be Hermitian")
        nu, U = np.linalg.eigh(gamma)
        if nu.min() < -tol:
            raise ValueError(f"rate matrix has negative eigenvalue {nu.min():.3e}: not CP")
        ops = np.asarray(operators, dtype=complex)
        collapse = []
        for a in range(len(nu)):
            if nu[a] > tol:
                collapse.append((np.tensordot(U[:, a], ops, axes=1), float(nu[a])))
        return cls(H, collapse, hbar)


def generator_norm(model: LindbladModel) -> float:
    """Upper bound on the operator norm of the GKLS generator."""
    n = 2 * np.linalg.norm(model.H, 2) / model.hbar
    for L, nu in model.collapse:
        n += 2 * nu * np.linalg.norm(L, 2) ** 2
    return float(n)


def gkls_rhs(rho: np.ndarray, model: LindbladModel) -> np.ndarray:
    H = model.H
    out = (H @ rho - rho @ H) / (1j * model.hbar)
    for L, nu in model.collapse:
        if nu == 0:
            continue
        LdL = L.conj().T @ L
        out += nu * (L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL))
    return out


def _rk4(rho: np.ndarray, model: LindbladModel, dt: float) -> np.ndarray:
    k1 = gkls_rhs(rho, model)
    k2 = gkls_rhs(rho + 0.5 * dt * k1, model)
    k3 = gkls_rhs(rho + 0.5 * dt * k2, model)
    k4 = gkls_rhs(rho + dt * k3, model)
    out = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return 0.5 * (out + out.conj().T)


def _check_positive(rho: np.ndarray, tol: float) -> None:
    lo = np.linalg.eigvalsh(rho).min()
    if lo < -tol:
        raise PositivityError(f"density matrix lost positivity: min eigenvalue {lo:.3e}")


def gkls_step(rho: DensityMatrix, model: LindbladModel, dt: float,
              check_positivity: bool = True) -> DensityMatrix:
    """One RK4 step of the GKLS equation.

    Raises :class:`StepTooLarge` when ``dt * ||generator|| > 0.1``.
    """
    norm = generator_norm(model)
    if dt * norm > STEP_GUARD:
        raise StepTooLarge(f"dt={dt:g} exceeds guard {STEP_GUARD}/||L|| = {STEP_GUARD / norm:g}")
    out = _rk4(rho.rho, model, dt)
    if check_positivity:
        _check_positive(out, 1e-6)
    return DensityMatrix(out, rho.dims)


def gkls_evolve(rho: DensityMatrix, model: LindbladModel, t: float, n_out: int = 1,
                max_dt: float | None = None, check_positivity: bool = True) -> list[DensityMatrix]:
    """Integrate to time ``t``, returning ``n_out + 1`` equally spaced snapshots
    (including the initial state).  Sub-steps respect the step guard."""
    norm = generator_norm(model)
    limit = 0.5 * STEP_GUARD / norm if norm > 0 else np.inf
    if max_dt is not None:
        limit = min(limit, max_dt)
    seg = t / n_out
    nsub = max(int(np.ceil(abs(seg) / limit)), 1) if np.isfinite(limit) else 1
    h = seg / nsub
    cur = rho.rho.copy()
    out = [rho]
    for _ in range(n_out):
        for _ in range(nsub):
            cur = _rk4(cur, model, h)
        if check_positivity:
            _check_positive(cur, 1e-6)
        out.append(DensityMatrix(cur.copy(), rho.dims))
    return out


def gkls_superoperator(model: LindbladModel) -> np.ndarray:
    """Generator as a ``D^2 x D^2`` matrix on row-major ``vec(rho)``.

    Used as an independent exact-exponential oracle for small systems.
    """
    d = model.dim
    eye = np.eye(d)
    H = model.H / model.hbar
    S = -1j * (np.kron(H, eye) - np.kron(eye, H.T))
    for L, nu in model.collapse:
        LdL = L.conj().T @ L
        S += nu * (np.kron(L, L.conj()) - 0.5 * np.kron(LdL, eye) - 0.5 * np.kron(eye, LdL.T))
    return S


# ---------------------------------------------------------------- channels

@dataclass
class QuantumChannel:
    kraus: list[np.ndarray]

    def __post_init__(self):
        self.kraus = [np.asarray(k, dtype=complex) for k in self.kraus]
        if not self.kraus:
            raise ChannelError("channel needs at least one Kraus operator")

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[1]

    def completeness_error(self) -> float:
        s = sum(k.conj().T @ k for k in self.kraus)
        return float(np.max(np.abs(s - np.eye(self.dim))))


def apply_channel(rho: DensityMatrix, ch: QuantumChannel, tol: float = 1e-8) -> DensityMatrix:
    err = ch.completeness_error()
    if err > tol:
        raise ChannelError(f"Kraus set is not trace preserving (error {err:.2e})")
    r = rho.rho
    out = sum(k @ r @ k.conj().T for k in ch.kraus)
    return DensityMatrix(0.5 * (out + out.conj().T), rho.dims)


def _weyl_operators(d: int):
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(d) / d))
    for a in range(d):
        xa = np.linalg.matrix_power(shift, a)
        for b in range(d):
            yield a, b, xa @ np.linalg.matrix_power(clock, b)


def depolarizing_channel(dim: int, p: float) -> QuantumChannel:
    """``rho -> (1-p) rho + p I/D`` via the D^2 Weyl (clock/shift) operators."""
    if not 0 <= p <= 1:
        raise ChannelError(f"depolarizing strength {p} outside [0, 1]")
    kraus = []
    for a, b, W in _weyl_operators(dim):
        w = 1 - p + p / dim ** 2 if a == b == 0 else p / dim ** 2
        if w > 0:
            kraus.append(np.sqrt(w) * W)
    return QuantumChannel(kraus)


def dephasing_channel(dim: int, p: float) -> QuantumChannel:
    """``rho -> (1-p) rho + p Diag(rho)``; ``p = 1`` keeps only the diagonal."""
    if not 0 <= p <= 1:
        raise ChannelError(f"dephasing strength {p} outside [0, 1]")
    kraus = [np.sqrt(1 - p) * np.eye(dim, dtype=complex)]
    for k in range(dim):
        P = np.zeros((dim, dim), dtype=complex)
        P[k, k] = np.sqrt(p)
        kraus.append(P)
    return QuantumChannel(kraus)


def amplitude_damping_channel(gamma: float) -> QuantumChannel:
    return QuantumChannel([np.array([[1, 0], [0, np.sqrt(1 - gamma)]]),
                           np.array([[0, np.sqrt(gamma)], [0, 0]])])


# ---------------------------------------------------------------- gate-based noise

def embed_operator(op: np.ndarray, qubit: int, n: int) -> np.ndarray:
    mats = [np.eye(2)] * n
    mats[qubit] = op
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out.astype(complex)


@dataclass
class GateNoiseProfile:
    """Per-qubit relaxation and dephasing, enhanced on the qubits a gate acts on.

    Rates are in 1/time.  ``relax`` and ``dephase`` are idle rates (scalar or
    one per qubit); during a gate the active qubits use the rates multiplied
    by ``gate_relax_factor`` / ``gate_dephase_factor``.
    """

    relax: float | Sequence[float] = 0.0
    dephase: float | Sequence[float] = 0.0
    gate_relax_factor: float = 1.0
    gate_dephase_factor: float = 1.0
    single_qubit_time: float = 1.0
    two_qubit_time: float = 1.0

    def __post_init__(self):
        for name in ("gate_relax_factor", "gate_dephase_factor",
                     "single_qubit_time", "two_qubit_time"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("relax", "dephase"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} rates must be >= 0")

    def rates(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        return (np.broadcast_to(np.asarray(self.relax, float), (n,)).copy(),
                np.broadcast_to(np.asarray(self.dephase, float), (n,)).copy())

    def duration(self, gate: Gate) -> float:
        return self.single_qubit_time if len(gate.qubits) == 1 else self.two_qubit_time

    def model(self, n: int, active: Sequence[int] = ()) -> LindbladModel:
        relax, deph = self.rates(n)
        for q in active:
            relax[q] *= self.gate_relax_factor
            deph[q] *= self.gate_dephase_factor
        terms = []
        for q in range(n):
            if relax[q] > 0:
                terms.append((embed_operator(SIGMA_MINUS, q, n), relax[q]))
            if deph[q] > 0:
                terms.append((embed_operator(DEPHASE, q, n), deph[q]))
        return LindbladModel(np.zeros((2 ** n, 2 ** n)), terms)


@dataclass
class NoisyRun:
    states: list[DensityMatrix]
    fidelities: np.ndarray
    times: np.ndarray


def _unitary_conj(rho: np.ndarray, gate: Gate, n: int) -> np.ndarray:
    # apply U rho U^dag column-by-column through the state simulator
    dims = (2,) * n
    cols = [apply_gate(StateVector(rho[:, j], dims), gate).amps for j in range(rho.shape[1])]
    half = np.stack(cols, axis=1)
    rows = [apply_gate(StateVector(half[i, :].conj(), dims), gate).amps.conj()
            for i in range(rho.shape[0])]
    return np.stack(rows, axis=0)


def noisy_circuit_run(rho0: StateVector | DensityMatrix, circuit: Circuit,
                      profile: GateNoiseProfile) -> NoisyRun:
    """Run ``circuit`` with a decoherence segment after every gate.

    Each gate is applied as an exact unitary and followed by GKLS evolution
    for the gate's duration, with enhanced rates on the gate's qubits and
    idle rates elsewhere.  Fidelity is measured against the noiseless run
    after every gate (entry 0 is the initial state).
    """
    n = circuit.n_qubits
    if isinstance(rho0, StateVector):
        ideal = rho0
        rho = rho0.to_density()
    else:
        ideal = rho0
        rho = rho0
    if rho.dim != 2 ** n:
        raise StateError(f"state dimension {rho.dim} does not match {n}-qubit circuit")
    dims = (2,) * n
    rho = DensityMatrix(rho.rho, dims)
    states, fids, times = [rho], [1.0], [0.0]
    t = 0.0
    for gate in circuit:
        r = _unitary_conj(rho.rho, gate, n)
        if isinstance(ideal, StateVector):
            ideal = apply_gate(ideal, gate)
        else:
            ideal = DensityMatrix(_unitary_conj(ideal.rho, gate, n), dims)
        dt = profile.duration(gate)
        model = profile.model(n, gate.qubits)
        rho = DensityMatrix(r, dims)
        if dt > 0 and model.collapse:
            rho = gkls_evolve(rho, model, dt)[-1]
        t += dt
        states.append(rho)
        fids.append(fidelity(ideal, rho))
        times.append(t)
    return NoisyRun(states, np.array(fids), np.array(times))
