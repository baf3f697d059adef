"""Liouville (Perron-Frobenius), Koopman and KvN/KvH evolution on periodic grids.

All generators use the same central-difference derivative, so on the
periodic grid the Liouville generator ``P = -sum_i D_i V_i`` and the
Koopman generator ``K = -sum_i V_i D_i`` satisfy ``P^T = -K`` exactly.
"""
from __future__ import annotations

import warnings
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.ndimage import map_coordinates
from scipy.sparse.linalg import splu

from .grid import PeriodicGrid, VectorField

__all__ = [
    "CFLError", "THETA_SCHEMES", "theta_value",
    "liouville_generator", "upwind_liouville_generator", "koopman_generator",
    "kvn_hamiltonian", "ThetaStepper", "liouville_step", "kvn_step",
    "koopman_observable_step", "koopman_theta_step",
    "integrable_propagate", "participation_ratio", "prequantum_operator",
]

THETA_SCHEMES = {"explicit": 0.0, "crank-nicolson": 0.5, "implicit": 1.0}


class CFLError(ValueError):
    pass


def theta_value(theta) -> float:
    if isinstance(theta, str):
        try:
            return THETA_SCHEMES[theta]
        except KeyError:
            raise ValueError(f"unknown theta scheme {theta!r}; choose from {sorted(THETA_SCHEMES)}")
    theta = float(theta)
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    return theta


def _courant(grid: PeriodicGrid, V: np.ndarray, dt: float) -> float:
    return float(max(np.max(np.abs(V[i])) * dt / grid.spacing[i] for i in range(grid.dim)))


def liouville_generator(grid: PeriodicGrid, field: VectorField, t: float = 0.0) -> sparse.csr_matrix:
    """Conservative ``f -> -div(V f)``; columns sum to zero."""
    V = field.on_grid(grid, t)
    P = sparse.csr_matrix((grid.size, grid.size))
    for i in range(grid.dim):
        P = P - grid.derivative(i) @ sparse.diags(V[i])
    return P.tocsr()


def upwind_liouville_generator(grid: PeriodicGrid, field: VectorField, t: float = 0.0) -> sparse.csr_matrix:
    """First-order donor-cell flux form; conservative and positivity friendly,
    but numerically diffusive (for contrast with the central scheme)."""
    V = field.on_grid(grid, t)
    n, h = grid.n, grid.spacing
    P = sparse.csr_matrix((grid.size, grid.size))
    for i in range(grid.dim):
        mats = [sparse.identity(m, format="csr") for m in n]
        fwd = sparse.diags([np.ones(n[i] - 1)], [1], shape=(n[i], n[i]), format="lil")
        fwd[n[i] - 1, 0] = 1
        mats_f = list(mats)
        mats_f[i] = fwd.tocsr()
        S = mats_f[0]
        for m in mats_f[1:]:
            S = sparse.kron(S, m, format="csr")
        # S shifts index j -> j+1 along axis i (x[j+1]); face velocity at j+1/2
        v = V[i]
        vface = 0.5 * (v + S @ v)
        vp, vm = np.maximum(vface, 0), np.minimum(vface, 0)
        # flux_{j+1/2} = vp f_j + vm f_{j+1}
        F = sparse.diags(vp) + sparse.diags(vm) @ S
        P = P - (F - S.T @ F) / h[i]
    return P.tocsr()


def koopman_generator(grid: PeriodicGrid, field: VectorField, t: float = 0.0) -> sparse.csr_matrix:
    """Advective ``s -> -V . grad s``."""
    V = field.on_grid(grid, t)
    K = sparse.csr_matrix((grid.size, grid.size))
    for i in range(grid.dim):
        K = K - sparse.diags(V[i]) @ grid.derivative(i)
    return K.tocsr()


def kvn_hamiltonian(grid: PeriodicGrid, field: VectorField, L: np.ndarray | None = None,
                    hbar: float = 1.0, picture: str = "eulerian", t: float = 0.0) -> sparse.csr_matrix:
    """Hermitian ``H = sum_i (V_i D_i + D_i V_i)/2 (+ diag(L)/hbar)`` with ``D = -i d/dz``.

    The Eulerian picture evolves ``psi(t, z)`` forward; ``picture='lagrangian'``
    gives the backward form for ``psi_0(t, z_0)`` (overall sign flip).
    """
    V = field.on_grid(grid, t)
    H = sparse.csr_matrix((grid.size, grid.size), dtype=complex)
    for i in range(grid.dim):
        Vi = sparse.diags(V[i].astype(complex))
        Di = grid.momentum(i)
        H = H + 0.5 * (Vi @ Di + Di @ Vi)
    if L is not None:
        H = H + sparse.diags(np.asarray(L, float).ravel() / hbar)
    if picture == "lagrangian":
        H = -H
    elif picture != "eulerian":
        raise ValueError(f"picture must be 'eulerian' or 'lagrangian', got {picture!r}")
    return H.tocsr()


class ThetaStepper:
    """Factorized theta-scheme for ``dx/dt = A x``:
    ``(I - theta dt A) x' = (I + (1 - theta) dt A) x``."""

    def __init__(self, A: sparse.spmatrix, dt: float, theta=0.5):
        self.theta = theta_value(theta)
        n = A.shape[0]
        I = sparse.identity(n, dtype=A.dtype, format="csc")
        self.rhs = (I + (1 - self.theta) * dt * A).tocsr()
        self.lu = splu((I - self.theta * dt * A).tocsc()) if self.theta > 0 else None

    def __call__(self, x: np.ndarray, steps: int = 1) -> np.ndarray:
        for _ in range(steps):
            y = self.rhs @ x
            x = self.lu.solve(y) if self.lu is not None else y
        return x


def liouville_step(pdf: np.ndarray, grid: PeriodicGrid, field: VectorField, dt: float,
                   theta=0.5, steps: int = 1, upwind: bool = False) -> np.ndarray:
    """Advance a density on the grid.  Mass ``sum pdf`` is conserved to rounding
    because the discrete divergence telescopes on the periodic grid."""
    th = theta_value(theta)
    V = field.on_grid(grid)
    if th < 0.5 and _courant(grid, V, dt) > 1.0:
        raise CFLError(f"Courant number {_courant(grid, V, dt):.3g} > 1 with theta={th} < 1/2")
    A = upwind_liouville_generator(grid, field) if upwind else liouville_generator(grid, field)
    shape = np.shape(pdf)
    return ThetaStepper(A, dt, th)(np.ravel(pdf).astype(float), steps).reshape(shape)


def kvn_step(psi: np.ndarray, grid: PeriodicGrid, field: VectorField, dt: float, theta=0.5,
             L: np.ndarray | None = None, hbar: float = 1.0, steps: int = 1,
             picture: str = "eulerian") -> np.ndarray:
    """Advance a KvN (or KvH, when ``L`` is given) wavefunction.

    At ``theta = 1/2`` the step is the Cayley transform of ``-i H dt`` and is
    exactly unitary.  Warns when the Courant number exceeds 1 (accuracy, not
    stability).
    """
    V = field.on_grid(grid)
    c = _courant(grid, V, dt)
    if c > 1.0:
        warnings.warn(f"KvN Courant number {c:.3g} > 1: phase errors will be large")
    H = kvn_hamiltonian(grid, field, L, hbar, picture)
    shape = np.shape(psi)
    return ThetaStepper(-1j * H, dt, theta)(np.ravel(psi).astype(complex), steps).reshape(shape)


def koopman_theta_step(obs: np.ndarray, grid: PeriodicGrid, field: VectorField, dt: float,
                       theta=0.5, steps: int = 1) -> np.ndarray:
    th = theta_value(theta)
    V = field.on_grid(grid)
    if th < 0.5 and _courant(grid, V, dt) > 1.0:
        raise CFLError(f"Courant number {_courant(grid, V, dt):.3g} > 1 with theta={th} < 1/2")
    shape = np.shape(obs)
    return ThetaStepper(koopman_generator(grid, field), dt, th)(np.ravel(obs), steps).reshape(shape)


def _backtrace(grid: PeriodicGrid, field: VectorField, dt: float, t: float) -> np.ndarray:
    z = grid.coords()
    f = lambda s, x: np.asarray(field(s, x))
    # integrate dz/ds = V backwards from s = t + dt to s = t
    h = -dt
    s = t + dt
    k1 = f(s, z)
    k2 = f(s + h / 2, z + h / 2 * k1)
    k3 = f(s + h / 2, z + h / 2 * k2)
    k4 = f(s + h, z + h * k3)
    return z + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def koopman_observable_step(obs: np.ndarray, grid: PeriodicGrid, field: VectorField, dt: float,
                            steps: int = 1, t0: float = 0.0, order: int = 3,
                            max_courant: float = 10.0) -> np.ndarray:
    """Semi-Lagrangian advection ``ds/dt = -V . grad s``.

    Each step evaluates ``s`` at the RK4 departure points ``Phi_{-dt}(z)``
    with periodic cubic-spline interpolation, so ``s(t, z) = s_0(Phi_{-t}(z))``.
    Constants are reproduced to rounding.
    """
    V = field.on_grid(grid)
    c = _courant(grid, V, dt)
    if c > max_courant:
        raise CFLError(f"Courant number {c:.3g} exceeds semi-Lagrangian guard {max_courant}")
    shape = np.shape(obs)
    s = np.reshape(np.asarray(obs, float), grid.n)
    lo, h = np.array(grid.lo), grid.spacing
    for k in range(steps):
        z = _backtrace(grid, field, dt, t0 + k * dt)
        idx = (z - lo[:, None]) / h[:, None]
        s = map_coordinates(s, idx, order=order, mode="grid-wrap").reshape(grid.n)
    return s.reshape(shape)


def integrable_propagate(coeffs: np.ndarray, J: np.ndarray, omega: Callable[[np.ndarray], np.ndarray],
                         t: float) -> np.ndarray:
    """Exact action-angle evolution.

    ``coeffs[a, k1, ..., kd]`` are angle-Fourier coefficients on action
    surface ``J[a]`` with integer modes in FFT order along each angle axis.
    Mode ``k`` acquires ``exp(-i k . omega(J) t)``.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    nJ = coeffs.shape[0]
    mode_shape = coeffs.shape[1:]
    d = len(mode_shape)
    w = np.asarray(omega(np.asarray(J)), float).reshape(nJ, d)
    ks = [np.fft.fftfreq(m, 1.0 / m) for m in mode_shape]
    phase = np.zeros(coeffs.shape)
    for i, k in enumerate(ks):
        shape = [1] * (d + 1)
        shape[i + 1] = mode_shape[i]
        phase = phase + w[:, i].reshape([nJ] + [1] * d) * k.reshape(shape)
    return coeffs * np.exp(-1j * phase * t)


def participation_ratio(psi: np.ndarray) -> float:
    """``1 / sum p^2`` for ``p = |psi|^2 / ||psi||^2``: number of occupied grid cells."""
    p = np.abs(np.ravel(psi)) ** 2
    p = p / p.sum()
    return float(1.0 / np.sum(p ** 2))


def prequantum_operator(grid: PeriodicGrid, A: Callable, dAdq: Callable, dAdp: Callable,
                        hbar: float = 1.0) -> sparse.csr_matrix:
    """Discrete van Hove operator ``A - p dA/dp + i hbar {A, .}`` on a (q, p) grid,
    with ``{f, g} = f_q g_p - f_p g_q``."""
    if grid.dim != 2:
        raise ValueError("prequantum operator needs a 2-D (q, p) grid")
    q, p = grid.coords()
    Dq, Dp = grid.derivative(0), grid.derivative(1)
    Aq, Ap = dAdq(q, p), dAdp(q, p)
    mult = sparse.diags((A(q, p) - p * Ap).astype(complex))
    bracket = sparse.diags(Aq) @ Dp - sparse.diags(Ap) @ Dq
    return (mult + 1j * hbar * bracket).tocsr()
