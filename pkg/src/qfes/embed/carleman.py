"""Carleman linearization of 1-D polynomial flows ``dz/dt = sum_m c_m z^m``.

With ``y_k = z^k`` the flow becomes ``dy_k/dt = sum_m k c_m y_{k+m-1}``;
truncation at order ``N_C`` drops every ``y_j`` with ``j > N_C``.  A constant
term ``c_0`` couples ``y_1`` to ``y_0 = 1`` and is carried as a forcing
vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg as sla

from .grid import VectorField
from .oracle import rk4_trajectory

__all__ = ["CarlemanSystem", "carleman_build", "carleman_propagate", "CarlemanResult",
           "laurent_density_matrix", "rescale_polynomial"]


@dataclass
class CarlemanSystem:
    order: int
    coeffs: tuple[complex, ...]
    C: np.ndarray
    forcing: np.ndarray

    @property
    def is_linear(self) -> bool:
        return all(c == 0 for m, c in enumerate(self.coeffs) if m != 1)


def carleman_build(field_or_coeffs, order: int) -> CarlemanSystem:
    """Banded generator ``C[k-1, k+m-2] = k c_m`` (0-based storage of ``k = 1..N_C``)."""
    coeffs = field_or_coeffs.poly if isinstance(field_or_coeffs, VectorField) else field_or_coeffs
    if coeffs is None or len(coeffs) == 0 or all(c == 0 for c in coeffs):
        raise ValueError("Carleman linearization needs a non-empty polynomial table")
    coeffs = tuple(np.trim_zeros(np.asarray(coeffs, dtype=complex), "b"))
    degree = len(coeffs) - 1
    if degree < 1:
        raise ValueError("polynomial degree must be >= 1")
    if order < degree:
        raise ValueError(f"truncation order {order} below polynomial degree {degree}")
    real = all(np.imag(c) == 0 for c in coeffs)
    C = np.zeros((order, order), dtype=complex)
    forcing = np.zeros(order, dtype=complex)
    for k in range(1, order + 1):
        for m, c in enumerate(coeffs):
            if c == 0:
                continue
            j = k + m - 1
            if j == 0:
                forcing[k - 1] += k * c
            elif j <= order:
                C[k - 1, j - 1] += k * c
    if real:
        C, forcing = C.real, forcing.real
    return CarlemanSystem(order, coeffs, C, forcing)


def laurent_density_matrix(coeffs, order: int) -> np.ndarray:
    """Matrix of ``psi -> -d/dz (V psi)`` on the dual Laurent basis ``e_k = z^{-k-1}``.

    Computed term by term from the Laurent exponents, independently of
    :func:`carleman_build`: ``-d/dz (c_m z^{m-k-1}) = (k+1-m) c_m z^{-(k-m+1)-1}``.
    On this basis the analytic density operator coincides with the Carleman
    generator, while on the monomials ``z^k`` the Koopman operator
    ``V d/dz`` is its transpose.
    """
    A = np.zeros((order, order), dtype=complex)
    for k in range(1, order + 1):
        for m, c in enumerate(coeffs):
            power = m - k - 1                    # exponent of V * e_k
            coef = -c * power                    # d/dz brings down the exponent
            new = power - 1                      # = -(j) - 1
            j = -new - 1
            if coef != 0 and 1 <= j <= order:
                A[j - 1, k - 1] += coef
    return A


def rescale_polynomial(coeffs, scale: float) -> tuple[complex, ...]:
    """Coefficients of the flow for ``w = z / scale``: ``c_m -> c_m scale^(m-1)``."""
    return tuple(c * scale ** (m - 1) for m, c in enumerate(coeffs))


@dataclass
class CarlemanResult:
    t: np.ndarray
    z: np.ndarray
    tail: np.ndarray
    scale: float
    domain_exit: bool
    reference: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def max_error(self) -> float:
        if self.reference is None:
            return float("nan")
        return float(np.max(np.abs(self.z - self.reference)))


def carleman_propagate(coeffs, z0: complex, dt: float, n_steps: int, order: int,
                       rescale: bool = True, max_excursion: float = 0.8,
                       exit_radius: float = 0.99) -> CarlemanResult:
    """Integrate the truncated Carleman system with Crank-Nicolson.

    When ``rescale`` is set, an RK4 reference trajectory fixes the scale
    ``S = max(1, max|z(t)| / max_excursion)``; the system is solved for
    ``w = z / S`` and mapped back.  ``domain_exit`` flags ``|w| >= exit_radius``
    at any step, where the monomial series stops converging.
    """
    coeffs = tuple(coeffs.poly) if isinstance(coeffs, VectorField) else tuple(coeffs)
    t = dt * np.arange(n_steps + 1)
    ref = rk4_trajectory(lambda z: np.polynomial.polynomial.polyval(z, coeffs), complex(z0), dt, n_steps)
    scale = 1.0
    if rescale:
        scale = max(1.0, float(np.max(np.abs(ref))) / max_excursion)
    c = rescale_polynomial(coeffs, scale)
    sys_ = carleman_build(c, order)
    w0 = complex(z0) / scale
    y = w0 ** np.arange(1, order + 1)
    I = np.eye(order)
    lhs = I - 0.5 * dt * sys_.C
    rhs = I + 0.5 * dt * sys_.C
    lu = sla.lu_factor(lhs)
    f = dt * sys_.forcing
    z = np.empty(n_steps + 1, dtype=complex)
    tail = np.empty(n_steps + 1)
    z[0], tail[0] = y[0], abs(y[-1])
    for k in range(n_steps):
        y = sla.lu_solve(lu, rhs @ y + f)
        z[k + 1], tail[k + 1] = y[0], abs(y[-1])
    exit_ = bool(np.any(np.abs(z) >= exit_radius) or not np.all(np.isfinite(z)))
    zz = z * scale
    if all(np.imag(x) == 0 for x in coeffs) and np.imag(z0) == 0:
        zz, ref = zz.real, ref.real
    return CarlemanResult(t, zz, tail, scale, exit_, ref, {"order": order, "dt": dt})
