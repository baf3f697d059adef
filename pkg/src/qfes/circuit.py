from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gates import Gate, GateError
from .state import StateError, StateVector, apply_gate

__all__ = ["Circuit", "run_circuit", "ghz_circuit"]


@dataclass
class Circuit:
    """Ordered gate list, applied left to right."""

    n_qubits: int
    gates: list[Gate] = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._validate(g)

    def _validate(self, gate: Gate) -> None:
        for q in gate.qubits:
            if not 0 <= q < self.n_qubits:
                raise GateError(f"{gate.kind} uses qubit {q}, circuit has {self.n_qubits}")

    def append(self, gate: Gate) -> "Circuit":
        self._validate(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates) -> "Circuit":
        for g in gates:
            self.append(g)
        return self

    def __len__(self) -> int:
        return len(self.gates)

    def __iter__(self):
        return iter(self.gates)

    def inverse(self) -> "Circuit":
        return Circuit(self.n_qubits, [g.inverse() for g in reversed(self.gates)])

    def count(self, kind: str | None = None) -> int:
        if kind is None:
            return len(self.gates)
        return sum(g.kind == kind.upper() for g in self.gates)

    def unitary(self) -> np.ndarray:
        """Dense matrix of the whole circuit (column j = circuit applied to |j>)."""
        d = 2 ** self.n_qubits
        cols = [run_circuit(StateVector.basis(j, self.n_qubits), self).amps for j in range(d)]
        return np.stack(cols, axis=1)


def run_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if state.dims != (2,) * circuit.n_qubits:
        raise StateError(f"state dims {state.dims} do not match a {circuit.n_qubits}-qubit circuit")
    for g in circuit.gates:
        state = apply_gate(state, g)
    return state


def ghz_circuit(n: int = 3) -> Circuit:
    """H on the first qubit followed by a CNOT fan-out."""
    c = Circuit(n, [Gate("H", 0)])
    for t in range(1, n):
        c.append(Gate("CNOT", t, 0))
    return c
