"""Brute-force trajectory ensembles: the reference every embedding is judged against."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import VectorField

__all__ = ["rk4_trajectory", "trajectory_oracle", "EnsembleResult"]


def rk4_trajectory(f: Callable, z0, dt: float, n_steps: int) -> np.ndarray:
    """Autonomous RK4 for ``dz/dt = f(z)``; returns ``(n_steps + 1, *shape(z0))``.

    Raises ``FloatingPointError`` on finite-time blow-up.
    """
    z = np.asarray(z0)
    out = np.empty((n_steps + 1,) + z.shape, dtype=np.result_type(z, float))
    out[0] = z
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps):
            k1 = f(z)
            k2 = f(z + 0.5 * dt * k1)
            k3 = f(z + 0.5 * dt * k2)
            k4 = f(z + dt * k3)
            z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            if not np.all(np.isfinite(z)):
                raise FloatingPointError(f"trajectory left the finite domain at step {k + 1} "
                                         f"(t = {(k + 1) * dt:g})")
            out[k + 1] = z
    return out


@dataclass
class EnsembleResult:
    t: np.ndarray
    paths: np.ndarray          # (n_steps + 1, dim, n_members)
    mean: np.ndarray           # (n_steps + 1, dim)
    stderr: np.ndarray         # (n_steps + 1, dim)

    def observable(self, g: Callable[[np.ndarray], np.ndarray]):
        """Ensemble mean and standard error of ``g(z)`` at every time."""
        vals = np.array([g(p) for p in self.paths])
        n = vals.shape[-1]
        se = vals.std(axis=-1, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(vals.shape[0])
        return vals.mean(axis=-1), se


def trajectory_oracle(field: VectorField, z0: np.ndarray, dt: float, n_steps: int,
                      t0: float = 0.0, lipschitz_guard: float = 0.5) -> EnsembleResult:
    """RK4 for every member of an ensemble ``z0`` of shape ``(dim, M)``.

    Step guard: a finite-difference Lipschitz estimate of ``V`` at the
    initial points times ``dt`` must not exceed ``lipschitz_guard``.
    """
    z = np.asarray(z0, float).reshape(field.dim, -1)
    eps = 1e-6
    v0 = np.asarray(field(t0, z))
    lip = 0.0
    for i in range(field.dim):
        dz = np.zeros_like(z)
        dz[i] = eps
        lip = max(lip, float(np.max(np.abs(np.asarray(field(t0, z + dz)) - v0))) / eps)
    if lip * dt > lipschitz_guard:
        raise ValueError(f"dt={dt:g} too large: Lipschitz estimate {lip:.3g} gives {lip * dt:.3g} "
                         f"> {lipschitz_guard}")
    out = np.empty((n_steps + 1,) + z.shape)
    out[0] = z
    t = t0
    for k in range(n_steps):
        k1 = field(t, z)
        k2 = field(t + dt / 2, z + dt / 2 * k1)
        k3 = field(t + dt / 2, z + dt / 2 * k2)
        k4 = field(t + dt, z + dt * k3)
        z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(z)):
            raise FloatingPointError(f"trajectory left the finite domain at step {k + 1}")
        t += dt
        out[k + 1] = z
    M = z.shape[1]
    mean = out.mean(axis=2)
    se = out.std(axis=2, ddof=1) / np.sqrt(M) if M > 1 else np.zeros_like(mean)
    return EnsembleResult(t0 + dt * np.arange(n_steps + 1), out, mean, se)
