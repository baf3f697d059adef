"""Elementary gate set.

Every gate is described by a :class:`Gate` record: a kind, target qubits,
optional control qubits, an optional angle and, for ``CU``, an explicit
unitary payload.  Controlled kinds store only the *base* unitary acting on
the targets; the control structure is applied by the state simulator.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "I2", "X", "Y", "Z", "H", "SWAP_MATRIX",
    "rx", "ry", "rz", "phase",
    "Gate", "GateError", "check_unitary",
]

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.array([[1, 0], [0, -1]], dtype=complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
SWAP_MATRIX = np.array([[1, 0, 0, 0],
                        [0, 0, 1, 0],
                        [0, 1, 0, 0],
                        [0, 0, 0, 1]], dtype=complex)

UNITARY_TOL = 1e-8


class GateError(ValueError):
    """Invalid gate specification (bad indices, non-unitary payload...)."""


def rx(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)


def ry(theta: float) -> np.ndarray:
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz(theta: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * theta), np.exp(0.5j * theta)])


def phase(phi: float) -> np.ndarray:
    """Single-qubit phase rotation ``diag(1, e^{i phi})``."""
    return np.diag([1.0, np.exp(1j * phi)]).astype(complex)


def check_unitary(u: np.ndarray, tol: float = UNITARY_TOL) -> None:
    u = np.asarray(u)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise GateError(f"unitary must be square, got shape {u.shape}")
    err = np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0])))
    if err > tol:
        raise GateError(f"matrix is not unitary: max|U^dag U - I| = {err:.3e} > {tol:g}")


_FIXED = {"X": X, "Y": Y, "Z": Z, "H": H}
_ROTATIONS = {"RX": rx, "RY": ry, "RZ": rz, "R": phase}
# kind -> (number of targets, number of controls)
_ARITY = {
    "X": (1, 0), "Y": (1, 0), "Z": (1, 0), "H": (1, 0),
    "RX": (1, 0), "RY": (1, 0), "RZ": (1, 0), "R": (1, 0),
    "CNOT": (1, 1), "CZ": (1, 1), "CR": (1, 1), "SWAP": (2, 0),
}


@dataclass(frozen=True)
class Gate:
    """One gate application.

    ``kind`` is one of X, Y, Z, H, RX, RY, RZ, R, CNOT, CZ, SWAP, CR, CU.
    Qubit indices are 0-based positions in the register, qubit 0 being the
    most significant bit of the basis-state integer.
    """

    kind: str
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    angle: float | None = None
    unitary: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "targets", tuple(int(t) for t in np.atleast_1d(self.targets)))
        object.__setattr__(self, "controls", tuple(int(c) for c in np.atleast_1d(self.controls)))
        if kind == "CU":
            if self.unitary is None:
                raise GateError("CU gate needs a unitary payload")
            u = np.asarray(self.unitary, dtype=complex)
            if u.shape != (2 ** len(self.targets),) * 2:
                raise GateError(f"CU payload shape {u.shape} does not match {len(self.targets)} target(s)")
            check_unitary(u)
            object.__setattr__(self, "unitary", u)
        elif kind in _ARITY:
            nt, nc = _ARITY[kind]
            if len(self.targets) != nt or len(self.controls) != nc:
                raise GateError(f"{kind} takes {nt} target(s) and {nc} control(s), "
                                f"got {self.targets} / {self.controls}")
            if (kind in _ROTATIONS or kind == "CR") and self.angle is None:
                raise GateError(f"{kind} needs an angle")
        else:
            raise GateError(f"unknown gate kind {self.kind!r}")
        qubits = self.targets + self.controls
        if len(set(qubits)) != len(qubits):
            raise GateError(f"repeated qubit in {kind}: targets={self.targets} controls={self.controls}")
        if any(q < 0 for q in qubits):
            raise GateError(f"negative qubit index in {kind}")

    @property
    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def base_matrix(self) -> np.ndarray:
        """Unitary acting on the targets once all controls are |1>."""
        k = self.kind
        if k in _FIXED:
            return _FIXED[k]
        if k in _ROTATIONS:
            return _ROTATIONS[k](self.angle)
        if k == "CNOT":
            return X
        if k == "CZ":
            return Z
        if k == "CR":
            return phase(self.angle)
        if k == "SWAP":
            return SWAP_MATRIX
        return self.unitary

    def matrix(self) -> np.ndarray:
        """Full unitary on ``controls + targets`` (controls most significant)."""
        base = self.base_matrix()
        nc = len(self.controls)
        if nc == 0:
            return base.copy()
        d = base.shape[0]
        full = np.eye(d * 2 ** nc, dtype=complex)
        full[-d:, -d:] = base
        return full

    def inverse(self) -> "Gate":
        k = self.kind
        if k in ("RX", "RY", "RZ", "R", "CR"):
            return Gate(k, self.targets, self.controls, angle=-self.angle)
        if k == "CU":
            return Gate(k, self.targets, self.controls, unitary=self.unitary.conj().T)
        return self
