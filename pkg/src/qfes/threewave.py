"""Quantized decay-type three-wave interaction in conserved-charge subspaces.

``H = i g a1^dag a2 a3 - i g* a1 a2^dag a3^dag`` with hbar = 1.  In the
subspace with invariants ``S2 = n1 + n2 = s2`` and ``S3 = n1 + n3 = s3``
(``s2 >= s3``) the basis ``|j> = |s3 - j, s2 - s3 + j, j>``, ``j = 0..D-1``,
``D = min(s2, s3) + 1`` turns the problem into a tridiagonal quantum walk.
Inputs with ``s2 < s3`` are relabelled by swapping waves 2 and 3; the
Hamiltonian is symmetric under that exchange.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import lgamma

import numpy as np
from scipy import linalg as sla

__all__ = [
    "ThreeWaveSubspace", "build_subspace_hamiltonian", "propagate", "propagator",
    "occupation_expectations", "verify_moment_equation", "classical_threewave",
    "classical_moment_residual", "coherent_subspace_state",
]


@dataclass(frozen=True)
class ThreeWaveSubspace:
    s2: int
    s3: int
    g: complex = 1.0
    swapped: bool = False

    @classmethod
    def canonical(cls, s2: int, s3: int, g: complex = 1.0) -> "ThreeWaveSubspace":
        if s2 < 0 or s3 < 0 or int(s2) != s2 or int(s3) != s3:
            raise ValueError(f"s2, s3 must be non-negative integers, got ({s2}, {s3})")
        s2, s3 = int(s2), int(s3)
        if s2 < s3:
            return cls(s3, s2, complex(g), True)
        return cls(s2, s3, complex(g), False)

    @property
    def D(self) -> int:
        return min(self.s2, self.s3) + 1

    def occupations(self) -> np.ndarray:
        """``(3, D)`` array of Fock occupations per basis label, in the
        caller's original wave labelling."""
        j = np.arange(self.D)
        n1, n2, n3 = self.s3 - j, self.s2 - self.s3 + j, j
        if self.swapped:
            n2, n3 = n3, n2
        return np.array([n1, n2, n3], dtype=float)


def hopping(sub: ThreeWaveSubspace) -> np.ndarray:
    """``H_{j+1/2}`` for ``j = 0..D-2``."""
    j = np.arange(1, sub.D)
    return np.sqrt(j * (sub.s3 + 1 - j) * (sub.s2 - sub.s3 + j).astype(float))


def build_subspace_hamiltonian(s2: int, s3: int, g: complex = 1.0) -> tuple[np.ndarray, ThreeWaveSubspace]:
    """Hermitian tridiagonal ``D x D`` Hamiltonian with zero diagonal.

    ``H[j, j+1] = i g H_{j+1/2}`` and ``H[j+1, j] = -i g* H_{j+1/2}``.
    """
    sub = ThreeWaveSubspace.canonical(s2, s3, g)
    h = hopping(sub)
    H = np.zeros((sub.D, sub.D), dtype=complex)
    idx = np.arange(sub.D - 1)
    H[idx, idx + 1] = 1j * sub.g * h
    H[idx + 1, idx] = np.conj(1j * sub.g * h)
    return H, sub


def propagator(H: np.ndarray, dt: float) -> np.ndarray:
    """``exp(-i H dt)`` from the Hermitian eigendecomposition."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * dt)) @ V.conj().T


def propagate(H: np.ndarray, psi0, dt: float, n_steps: int, fast_forward: bool = False) -> np.ndarray:
    """Trajectory ``(n_steps + 1, D)``.

    By default the single-step propagator is applied repeatedly; with
    ``fast_forward`` each state is computed directly as ``U(k dt) psi0``.
    """
    psi0 = np.asarray(getattr(psi0, "amps", psi0), dtype=complex)
    out = np.empty((n_steps + 1, psi0.size), dtype=complex)
    out[0] = psi0
    if fast_forward:
        w, V = np.linalg.eigh(H)
        c = V.conj().T @ psi0
        t = dt * np.arange(n_steps + 1)
        out[:] = (np.exp(-1j * np.outer(t, w)) * c) @ V.T
        return out
    U = propagator(H, dt)
    for k in range(n_steps):
        out[k + 1] = U @ out[k]
    return out


def occupation_expectations(traj: np.ndarray, sub: ThreeWaveSubspace) -> dict[str, np.ndarray]:
    """Time series of ``<n1>, <n2>, <n3>, <n1^2>`` along a trajectory."""
    traj = np.atleast_2d(traj)
    if traj.shape[1] != sub.D:
        raise ValueError(f"trajectory dimension {traj.shape[1]} != D = {sub.D}")
    p = np.abs(traj) ** 2
    n = sub.occupations()
    return {"n1": p @ n[0], "n2": p @ n[1], "n3": p @ n[2], "n1sq": p @ n[0] ** 2}


def _d2(x: np.ndarray, dt: float) -> np.ndarray:
    return (x[2:] - 2 * x[1:-1] + x[:-2]) / dt ** 2


def verify_moment_equation(traj: np.ndarray, sub: ThreeWaveSubspace, dt: float,
                           spontaneous: bool = True) -> dict[str, float]:
    """Central second differences of the occupations against the exact
    quantum moment equation.

    Returns the max residual against the right-hand side (``residual``) and
    the max deviations of ``d2<n1> + d2<n2>`` and ``d2<n1> + d2<n3>``.
    ``spontaneous=False`` drops the ``+1`` in ``(2 s2 + 2 s3 + 1)``.
    """
    if len(traj) < 5:
        raise ValueError("need at least 5 trajectory points")
    o = occupation_expectations(traj, sub)
    s2, s3 = sub.s2, sub.s3
    c = 2 * s2 + 2 * s3 + (1 if spontaneous else 0)
    rhs = 2 * abs(sub.g) ** 2 * (s2 * s3 - c * o["n1"] + 3 * o["n1sq"])
    d1, d2_, d3 = _d2(o["n1"], dt), _d2(o["n2"], dt), _d2(o["n3"], dt)
    return {
        "residual": float(np.max(np.abs(d1 - rhs[1:-1]))),
        "mirror_2": float(np.max(np.abs(d1 + d2_))),
        "mirror_3": float(np.max(np.abs(d1 + d3))),
    }


# ---------------------------------------------------------------- classical

def _rhs(a: np.ndarray, g: complex) -> np.ndarray:
    a1, a2, a3 = a
    gc = np.conj(g)
    return np.array([g * a2 * a3, -gc * a1 * np.conj(a3), -gc * a1 * np.conj(a2)])


def classical_threewave(a0, g: complex, dt: float, n_steps: int, max_phase_step: float = 0.5) -> np.ndarray:
    """RK4 trajectory ``(n_steps + 1, 3)`` of the c-number three-wave equations.

    Step guard: ``|g| * max|a| * dt`` must stay below ``max_phase_step``.
    """
    a = np.asarray(a0, dtype=complex).copy()
    scale = abs(g) * np.sqrt(np.sum(np.abs(a) ** 2)) * dt
    if scale > max_phase_step:
        raise ValueError(f"dt too large for the coupling: |g| |a| dt = {scale:.3g} > {max_phase_step}")
    out = np.empty((n_steps + 1, 3), dtype=complex)
    out[0] = a
    for k in range(n_steps):
        k1 = _rhs(a, g)
        k2 = _rhs(a + 0.5 * dt * k1, g)
        k3 = _rhs(a + 0.5 * dt * k2, g)
        k4 = _rhs(a + dt * k3, g)
        a = a + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = a
    return out


def classical_moment_residual(traj: np.ndarray, g: complex, dt: float) -> float:
    """Max residual of ``d2 n1 = 2|g|^2 [s2 s3 - 2(s2+s3) n1 + 3 n1^2]`` along one trajectory."""
    n = np.abs(traj) ** 2
    s2 = n[0, 0] + n[0, 1]
    s3 = n[0, 0] + n[0, 2]
    n1 = n[:, 0]
    rhs = 2 * abs(g) ** 2 * (s2 * s3 - 2 * (s2 + s3) * n1 + 3 * n1 ** 2)
    return float(np.max(np.abs(_d2(n1, dt) - rhs[1:-1])))


def coherent_subspace_state(sub: ThreeWaveSubspace, alpha) -> np.ndarray:
    """Product coherent state ``|alpha1, alpha2, alpha3>`` projected onto the
    subspace and renormalized (``alpha`` in the caller's labelling)."""
    a1, a2, a3 = (complex(x) for x in alpha)
    if sub.swapped:
        a2, a3 = a3, a2
    occ = sub.occupations()
    if sub.swapped:
        occ = occ[[0, 2, 1]]
    logs, phases = [], []
    for n, a in zip(occ, (a1, a2, a3)):
        if a == 0:
            logs.append(np.where(n == 0, 0.0, -np.inf))
            phases.append(np.zeros_like(n))
        else:
            logs.append(n * np.log(abs(a)) - 0.5 * np.array([lgamma(k + 1) for k in n]))
            phases.append(n * np.angle(a))
    lw = np.sum(logs, axis=0)
    c = np.exp(lw - np.max(lw)) * np.exp(1j * np.sum(phases, axis=0))
    return c / np.linalg.norm(c)
