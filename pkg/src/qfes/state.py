"""Pure and mixed state carriers, gate application and measurement.

Basis convention: a register of subsystems with dimensions ``dims`` is
stored as a flat amplitude array in C order, so the first subsystem is the
most significant digit.  For qubits, ``|q1 q2 ... qn>`` maps to the integer
whose most significant bit is ``q1``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

from .gates import Gate, GateError, check_unitary, X, Y, Z

__all__ = [
    "StateVector", "DensityMatrix", "StateError",
    "apply_gate", "apply_operator", "measure_samples", "fidelity", "bloch_vector",
]

NORM_TOL = 1e-10


class StateError(ValueError):
    """Invalid or inconsistent state data."""


@dataclass(frozen=True)
class StateVector:
    """Dense amplitude vector over a register of subsystems.

    Treat instances as immutable values: every operation in this package
    returns a new state.
    """

    amps: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        amps = np.asarray(self.amps, dtype=complex).ravel()
        dims = tuple(int(d) for d in self.dims)
        if int(np.prod(dims, dtype=np.int64)) != amps.size:
            raise StateError(f"{amps.size} amplitudes do not fit dims {dims}")
        amps.setflags(write=False)
        object.__setattr__(self, "amps", amps)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def zeros(cls, n_qubits: int) -> "StateVector":
        return cls.basis(0, n_qubits)

    @classmethod
    def basis(cls, index: int | str, n_qubits: int | None = None,
              dims: Sequence[int] | None = None) -> "StateVector":
        """Computational basis state; ``index`` may be a bitstring like ``'101'``."""
        if isinstance(index, str):
            n_qubits = len(index) if n_qubits is None else n_qubits
            index = int(index, 2)
        dims = tuple(dims) if dims is not None else (2,) * n_qubits
        amps = np.zeros(int(np.prod(dims, dtype=np.int64)), dtype=complex)
        if not 0 <= index < amps.size:
            raise StateError(f"basis index {index} out of range for dimension {amps.size}")
        amps[index] = 1.0
        return cls(amps, dims)

    @classmethod
    def from_amplitudes(cls, amps, dims: Sequence[int] | None = None,
                        normalize: bool = True) -> "StateVector":
        amps = np.asarray(amps, dtype=complex).ravel()
        if dims is None:
            n = int(round(np.log2(amps.size)))
            dims = (2,) * n if 2 ** n == amps.size else (amps.size,)
        if normalize:
            nrm = np.linalg.norm(amps)
            if nrm == 0:
                raise StateError("cannot normalize the zero vector")
            amps = amps / nrm
        return cls(amps, tuple(dims))

    @classmethod
    def uniform(cls, n_qubits: int) -> "StateVector":
        d = 2 ** n_qubits
        return cls(np.full(d, d ** -0.5, dtype=complex), (2,) * n_qubits)

    @property
    def dim(self) -> int:
        return self.amps.size

    @property
    def n_qubits(self) -> int:
        if any(d != 2 for d in self.dims):
            raise StateError(f"register {self.dims} is not all qubits")
        return len(self.dims)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amps) ** 2

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        return complex(np.vdot(self.amps, other.amps))

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amps, self.amps.conj()), self.dims)


@dataclass(frozen=True)
class DensityMatrix:
    rho: np.ndarray
    dims: tuple[int, ...] | None = None

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise StateError(f"density matrix must be square, got {rho.shape}")
        dims = (rho.shape[0],) if self.dims is None else tuple(int(d) for d in self.dims)
        if int(np.prod(dims, dtype=np.int64)) != rho.shape[0]:
            raise StateError(f"dims {dims} do not match matrix size {rho.shape[0]}")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "dims", dims)

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim, dtype=complex) / dim)

    @property
    def dim(self) -> int:
        return self.rho.shape[0]

    def trace(self) -> float:
        return float(np.real(np.trace(self.rho)))

    def purity(self) -> float:
        return float(np.real(np.einsum("ij,ji->", self.rho, self.rho)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))

    def check(self, herm_tol: float = 1e-12, trace_tol: float = 1e-10,
              pos_tol: float = 1e-9) -> None:
        """Raise :class:`StateError` if any density-matrix invariant fails."""
        herm = np.max(np.abs(self.rho - self.rho.conj().T))
        if herm > herm_tol:
            raise StateError(f"not Hermitian: {herm:.3e}")
        tr = self.trace()
        if abs(tr - 1) > trace_tol:
            raise StateError(f"trace {tr!r} deviates from 1")
        lo = self.eigenvalues().min()
        if lo < -pos_tol:
            raise StateError(f"negative eigenvalue {lo:.3e}")

    def diagonal(self) -> np.ndarray:
        return np.real(np.diag(self.rho)).copy()


def _check_indices(dims: tuple[int, ...], qubits: Sequence[int]) -> None:
    for q in qubits:
        if not 0 <= q < len(dims):
            raise GateError(f"qubit index {q} out of range for {len(dims)}-subsystem register")


def apply_operator(state: StateVector, matrix: np.ndarray, targets: Sequence[int],
                   controls: Sequence[int] = ()) -> StateVector:
    """Apply ``matrix`` to subsystems ``targets`` when every control qubit is |1>.

    Works for arbitrary subsystem dimensions on the targets; controls must be
    qubits.  No unitarity check is made here (see :func:`apply_gate`).
    """
    dims = state.dims
    targets, controls = tuple(targets), tuple(controls)
    _check_indices(dims, targets + controls)
    if any(dims[c] != 2 for c in controls):
        raise GateError("control subsystems must be qubits")
    dt = int(np.prod([dims[t] for t in targets], dtype=np.int64))
    matrix = np.asarray(matrix, dtype=complex)
    if matrix.shape != (dt, dt):
        raise GateError(f"operator shape {matrix.shape} does not match target dimension {dt}")

    axes = controls + targets
    psi = np.moveaxis(state.amps.reshape(dims), axes, range(len(axes))).copy()
    nc = len(controls)
    block = psi[(1,) * nc] if nc else psi
    shape = block.shape
    block[...] = (matrix @ block.reshape(dt, -1)).reshape(shape)
    out = np.moveaxis(psi, range(len(axes)), axes)
    return StateVector(out.reshape(-1), dims)


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Return ``U_gate |state>`` with the gate embedded in the full register."""
    _check_indices(state.dims, gate.qubits)
    if any(state.dims[q] != 2 for q in gate.qubits):
        raise GateError(f"{gate.kind} acts on qubits, register dims are {state.dims}")
    return apply_operator(state, gate.base_matrix(), gate.targets, gate.controls)


def measure_samples(state: StateVector, shots: int, seed: int | None = None) -> dict[str, int]:
    """Sample computational-basis outcomes; returns ``{bitstring: count}``.

    Keys are bitstrings for qubit registers and decimal indices otherwise.
    Outcomes with zero counts are omitted.
    """
    if shots < 1:
        raise StateError(f"shots must be >= 1, got {shots}")
    nrm = state.norm()
    if abs(nrm - 1) > 1e-6:
        raise StateError(f"state is not normalized (norm {nrm:.8f})")
    p = state.probabilities()
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p)
    qubits = all(d == 2 for d in state.dims)
    width = len(state.dims)
    out = {}
    for idx in np.flatnonzero(counts):
        key = format(idx, f"0{width}b") if qubits else str(idx)
        out[key] = int(counts[idx])
    return out


def fidelity(a, b) -> float:
    """State fidelity, insensitive to global phase.

    Pure/pure gives ``|<a|b>|^2``; pure/mixed gives ``<a|rho|a>``; mixed/mixed
    uses the Uhlmann form ``(Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2``.
    """
    if a.dim != b.dim:
        raise StateError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        f = abs(np.vdot(a.amps, b.amps)) ** 2
    elif isinstance(a, StateVector):
        f = np.real(np.vdot(a.amps, b.rho @ a.amps))
    elif isinstance(b, StateVector):
        f = np.real(np.vdot(b.amps, a.rho @ b.amps))
    else:
        sa = sla.sqrtm(a.rho)
        f = np.real(np.trace(sla.sqrtm(sa @ b.rho @ sa))) ** 2
    return float(min(max(f, 0.0), 1.0))


def bloch_vector(rho: DensityMatrix) -> tuple[float, float, float]:
    """``(nx, ny, nz)`` with ``rho = (I + n.sigma)/2``."""
    if rho.dim != 2:
        raise StateError(f"Bloch vector needs a qubit, got dimension {rho.dim}")
    r = rho.rho
    return tuple(float(np.real(np.trace(r @ s))) for s in (X, Y, Z))
