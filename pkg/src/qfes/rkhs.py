"""Reproducing-kernel Hilbert spaces of holomorphic functions in one variable.

A space is fixed by a weight ``G`` on the plane (or a measure on the unit
circle) and a normalization ``Omega``; the metric on monomials is

    M_jk = (1 / Omega) * int conj(z)^j z^k G d^2z .

Two conventions are supported.  ``raw-moment`` returns ``M`` itself;
``factorial-normalized`` returns ``rho_jk = M_jk / (j! k!)``, which is the
table quoted for coherent-state expansions in powers ``z^j / j!``.  The
normalized number basis ``|j> = z^j / sqrt(M_jj)`` is the same in both.

Named spaces (all rotation invariant, hence diagonal metrics):

=================  ============================  ========  ==========
name               weight                        Omega     M_jj
=================  ============================  ========  ==========
segal-bargmann     exp(-|z|^2) on C              pi        j!
bergman            1 on |z| < 1                  pi        1/(j+1)
hardy              d(theta) on |z| = 1           2 pi      1
=================  ============================  ========  ==========
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache
from math import factorial, lgamma
from typing import Callable

import numpy as np
from scipy import integrate, special

__all__ = [
    "NAMED_SPACES", "CONVENTIONS", "LADDER_CONVENTIONS",
    "QuadratureError", "DomainError", "RkhsSpace",
    "metric_moments", "factorial_weights", "LadderPair", "ladder_operators",
    "KernelValue", "kernel_eval", "closed_form_kernel", "reproduce_check",
    "coherent_expand", "eigen_residual",
]

NAMED_SPACES = ("segal-bargmann", "bergman", "hardy")
CONVENTIONS = ("raw-moment", "factorial-normalized")
LADDER_CONVENTIONS = ("multiplication-raises", "derivative-raises")


class QuadratureError(RuntimeError):
    """Moment quadrature failed to converge to the requested tolerance."""


class DomainError(ValueError):
    """Point outside the domain on which the space's kernel converges."""


@dataclass(frozen=True)
class RkhsSpace:
    """Weighted space of holomorphic functions.

    For ``name='custom'`` supply ``weight(z)`` (complex array in, non-negative
    real array out) supported on ``|z| < radius``; ``radial=True`` declares
    ``weight`` rotation invariant, which makes the metric diagonal and lets
    the angular integral be done exactly.
    """

    name: str = "segal-bargmann"
    J: int = 10
    convention: str = "raw-moment"
    weight: Callable[[np.ndarray], np.ndarray] | None = None
    radius: float = np.inf
    omega: float = np.pi
    radial: bool = True

    def __post_init__(self):
        if self.name not in NAMED_SPACES + ("custom",):
            raise ValueError(f"unknown space {self.name!r}")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"convention must be one of {CONVENTIONS}, got {self.convention!r}")
        if int(self.J) != self.J or self.J < 0:
            raise ValueError(f"J must be a non-negative integer, got {self.J}")
        if self.name == "custom" and self.weight is None:
            raise ValueError("custom space needs a weight function")
        if self.omega <= 0:
            raise ValueError("normalization omega must be positive")

    @classmethod
    def named(cls, name: str, J: int = 10, convention: str = "raw-moment") -> "RkhsSpace":
        omega = 2 * np.pi if name == "hardy" else np.pi
        radius = np.inf if name == "segal-bargmann" else 1.0
        return cls(name, J, convention, radius=radius, omega=omega)

    @property
    def bounded(self) -> bool:
        """True for spaces whose kernel only converges inside the unit disk."""
        return self.name in ("bergman", "hardy") or (self.name == "custom" and np.isfinite(self.radius))

    def with_order(self, J: int) -> "RkhsSpace":
        return RkhsSpace(self.name, J, self.convention, self.weight, self.radius, self.omega, self.radial)

    def check_domain(self, *points) -> None:
        if not self.bounded:
            return
        R = 1.0 if self.name != "custom" else self.radius
        for y in points:
            if abs(complex(y)) >= R:
                raise DomainError(f"|{complex(y):g}| >= {R:g}: outside the domain of the {self.name} space")


def factorial_weights(J: int) -> np.ndarray:
    """``F[j, k] = j! k!`` so that ``rho = M / F``."""
    f = np.array([float(factorial(j)) for j in range(J + 1)])
    return np.outer(f, f)


# ---------------------------------------------------------------- moments

def _named_raw(name: str, J: int) -> np.ndarray:
    """Diagonal raw moments by Gauss quadrature in ``u = |z|^2``.

    With ``d^2z = (1/2) du dtheta`` the angular integral of
    ``conj(z)^j z^k`` vanishes unless ``j = k`` and gives ``2 pi`` otherwise.
    """
    j = np.arange(J + 1)
    if name == "segal-bargmann":
        u, w = special.roots_laguerre(J + 2)
        # (1/pi) * 2 pi * (1/2) * int u^j e^{-u} du; evaluated in log space
        # so that high orders do not overflow the node powers
        logs = j[:, None] * np.log(u)[None] + np.log(w)[None]
        return np.exp(special.logsumexp(logs, axis=1))
    if name == "bergman":
        x, w = special.roots_legendre(J + 2)
        u, w = 0.5 * (x + 1), 0.5 * w
        return (u[None] ** j[:, None]) @ w
    if name == "hardy":
        n = 2 * J + 2
        th = 2 * np.pi * np.arange(n) / n
        z = np.exp(1j * th)
        V = z[None] ** j[:, None]
        return np.real(np.diag(V.conj() @ V.T)) / n
    raise ValueError(name)


def _custom_raw(space: RkhsSpace, J: int, rtol: float) -> np.ndarray:
    R = space.radius
    # quadpack rejects epsrel below 50 machine epsilons
    eps = max(rtol, 1e-13)
    M = np.zeros((J + 1, J + 1), dtype=complex)
    if space.radial:
        for j in range(J + 1):
            f = lambda r, j=j: r ** (2 * j + 1) * float(np.real(space.weight(np.array(r + 0j))))
            with warnings.catch_warnings():
                # the error estimate below is the verdict; quadpack's own warning is redundant
                warnings.simplefilter("ignore", integrate.IntegrationWarning)
                val, err = integrate.quad(f, 0, R, limit=200, epsabs=0, epsrel=eps)
            if not np.isfinite(val) or err > rtol * max(abs(val), 1e-300) * 10:
                raise QuadratureError(f"moment {j}: quadrature error estimate {err:.3g} for value {val:.3g}")
            M[j, j] = 2 * np.pi * val / space.omega
        return M
    n_th = 4 * J + 8
    th = 2 * np.pi * np.arange(n_th) / n_th
    jj = np.arange(J + 1)

    def ring(r):
        z = r * np.exp(1j * th)
        G = np.real(space.weight(z))
        V = z[None] ** jj[:, None]
        return ((V.conj() * G) @ V.T).ravel() * r * (2 * np.pi / n_th)

    val, err = integrate.quad_vec(ring, 0, R, epsabs=0, epsrel=eps, limit=400)
    scale = np.max(np.abs(val))
    if not np.all(np.isfinite(val)) or err > rtol * scale * 10:
        raise QuadratureError(f"quadrature error estimate {err:.3g} exceeds tolerance")
    return val.reshape(J + 1, J + 1) / space.omega


@lru_cache(maxsize=64)
def _raw_cached(name: str, J: int) -> np.ndarray:
    M = np.diag(_named_raw(name, J))
    M.setflags(write=False)
    return M


def metric_moments(space: RkhsSpace, J: int | None = None, convention: str | None = None,
                   rtol: float = 1e-11) -> np.ndarray:
    """``(J+1) x (J+1)`` metric on monomials under the requested convention.

    Named spaces use fixed Gauss rules (exact for the polynomial moments up
    to rounding); custom weights use adaptive quadrature and raise
    :class:`QuadratureError` when the error estimate exceeds ``rtol``.
    """
    J = space.J if J is None else J
    convention = space.convention if convention is None else convention
    if convention not in CONVENTIONS:
        raise ValueError(f"convention must be one of {CONVENTIONS}")
    if space.name == "custom":
        M = _custom_raw(space, J, rtol)
        if np.max(np.abs(M.imag)) <= 1e-14 * np.max(np.abs(M)):
            M = M.real
    else:
        M = np.array(_raw_cached(space.name, J))
    if convention == "factorial-normalized":
        M = M / factorial_weights(J)
    return M


def _raw_diagonal(space: RkhsSpace, J: int) -> np.ndarray | None:
    """Raw diagonal moments, or None when the metric is not diagonal."""
    M = metric_moments(space, J, "raw-moment")
    off = M - np.diag(np.diag(M))
    if np.max(np.abs(off)) > 1e-10 * np.max(np.abs(np.diag(M))):
        return None
    return np.real(np.diag(M))


# ---------------------------------------------------------------- ladders

@dataclass
class LadderPair:
    W: np.ndarray
    Z: np.ndarray
    convention: str

    def ccr_residual(self) -> float:
        """Max deviation of ``[Z, W]`` from the identity on rows/cols ``0..J-1``."""
        C = self.Z @ self.W - self.W @ self.Z
        n = C.shape[0] - 1
        return float(np.max(np.abs(C[:n, :n] - np.eye(n))))

    def number_operator(self) -> np.ndarray:
        return self.W @ self.Z


def ladder_operators(space: RkhsSpace, J: int | None = None,
                     convention: str = "multiplication-raises") -> LadderPair:
    """Raising ``W`` and lowering ``Z`` in the normalized number basis.

    With ``r_j = M_jj / M_{j-1,j-1}`` (raw moments), multiplication by ``z``
    and ``d/dz`` give ``W[j, j-1] = sqrt(r_j)`` and ``Z[j-1, j] = j / sqrt(r_j)``.
    ``derivative-raises`` is the adjoint swap ``(W, Z) -> (Z^dag, W^dag)``;
    both satisfy the CCR because ``W[j, j-1] Z[j-1, j] = j`` either way.

    A non-diagonal metric falls back to the Cholesky-orthonormalized
    monomials, where the same operators are conjugated by the Gram factor.
    """
    J = space.J if J is None else J
    if convention not in LADDER_CONVENTIONS:
        raise ValueError(f"convention must be one of {LADDER_CONVENTIONS}")
    n = J + 1
    d = _raw_diagonal(space, J)
    if d is not None:
        j = np.arange(1, n)
        r = d[1:] / d[:-1]
        up, down = np.sqrt(r), j / np.sqrt(r)
        if convention == "derivative-raises":
            up, down = down, up
        W = np.zeros((n, n))
        Z = np.zeros((n, n))
        W[j, j - 1] = up
        Z[j - 1, j] = down
        return LadderPair(W, Z, convention)
    # general Gram-based construction: M = R^dag R with R upper triangular
    M = metric_moments(space, J, "raw-moment")
    R = np.linalg.cholesky(M).conj().T
    Rinv = np.linalg.inv(R)
    S = np.diag(np.ones(n - 1), -1)                   # z * z^k = z^{k+1}
    Dm = np.diag(np.arange(1, n, dtype=float), 1)     # d/dz z^k = k z^{k-1}
    W, Z = R @ S @ Rinv, R @ Dm @ Rinv
    if convention == "derivative-raises":
        # adjoint swap; [Z^dag, W^dag] = [Z, W]^dag keeps the CCR
        W, Z = Z.conj().T, W.conj().T
    return LadderPair(W, Z, convention)


# ---------------------------------------------------------------- kernels

@dataclass
class KernelValue:
    value: complex
    tail_bound: float
    J: int


def closed_form_kernel(space: RkhsSpace, y, z) -> complex:
    x = np.conj(y) * z
    if space.name == "segal-bargmann":
        return np.exp(x)
    if space.name == "bergman":
        return 1.0 / (1.0 - x) ** 2
    if space.name == "hardy":
        return 1.0 / (1.0 - x)
    raise ValueError("no closed form for custom spaces")


def _tail(space: RkhsSpace, a: float, J: int, last_term: float, ratio: float) -> float:
    """Bound on ``sum_{j > J} |term_j|`` for ``|conj(y) z| = a``."""
    if space.name == "segal-bargmann":
        # sum_{j>J} a^j / j! <= a^{J+1}/(J+1)! * e^a
        return float(np.exp((J + 1) * np.log(a) - lgamma(J + 2) + a)) if a > 0 else 0.0
    if space.name == "hardy":
        return a ** (J + 1) / (1 - a)
    if space.name == "bergman":
        # sum_{j>J} (j+1) a^j = a^{J+1} ((J+2) - (J+1) a) / (1-a)^2
        return a ** (J + 1) * ((J + 2) - (J + 1) * a) / (1 - a) ** 2
    if ratio >= 1:
        return np.inf
    return last_term * ratio / (1 - ratio)


def kernel_eval(space: RkhsSpace, y, z, J: int | None = None) -> KernelValue:
    """Partial sum ``sum_{j <= J} (conj(y) z)^j / M_jj`` of the reproducing kernel."""
    J = space.J if J is None else J
    space.check_domain(y, z)
    d = _raw_diagonal(space, J)
    if d is None:
        M = metric_moments(space, J, "raw-moment")
        vy = np.complex128(y) ** np.arange(J + 1)
        vz = np.complex128(z) ** np.arange(J + 1)
        val = np.conj(vy) @ np.linalg.solve(M.T, vz)
        return KernelValue(complex(val), np.nan, J)
    x = np.conj(complex(y)) * complex(z)
    terms = x ** np.arange(J + 1) / d
    a = abs(x)
    ratio = a * d[-2] / d[-1] if J >= 1 else np.inf
    return KernelValue(complex(np.sum(terms)), _tail(space, a, J, abs(terms[-1]), ratio), J)


def _inner_product_rule(space: RkhsSpace, degree: int, n_theta: int):
    """Nodes ``z`` and weights ``w`` with ``<f, g> ~ sum w conj(f(z)) g(z)``."""
    th = 2 * np.pi * np.arange(n_theta) / n_theta
    if space.name == "hardy":
        return np.exp(1j * th), np.full(n_theta, 1.0 / n_theta)
    if space.name == "segal-bargmann":
        u, wu = special.roots_laguerre(max(degree + 8, 40))
        scale = 0.5 / np.pi * (2 * np.pi / n_theta)
    elif space.name == "bergman":
        x, wu = special.roots_legendre(max(degree + 8, 40))
        u, wu = 0.5 * (x + 1), 0.5 * wu
        scale = 0.5 / np.pi * (2 * np.pi / n_theta)
    else:
        raise ValueError("quadrature rule only for named spaces")
    r = np.sqrt(u)
    z = (r[:, None] * np.exp(1j * th)[None]).ravel()
    w = (wu[:, None] * np.full(n_theta, scale)[None]).ravel()
    return z, w


def reproduce_check(space: RkhsSpace, coeffs, y, n_theta: int = 96) -> float:
    """``|<K_y, f> - f(y)|`` for ``f = sum_k coeffs[k] z^k``.

    The inner product is evaluated by quadrature with the closed-form kernel
    (named spaces) or the truncated series (custom spaces, through the
    adaptive moment integrals).
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    deg = len(coeffs) - 1
    if deg > space.J:
        raise ValueError(f"polynomial degree {deg} exceeds the truncation order J={space.J}")
    space.check_domain(y)
    fy = np.polynomial.polynomial.polyval(complex(y), coeffs)
    if space.name == "custom":
        # <K_y, f> = c^dag M a with K_y = sum_k c_k z^k and M c = conj(y^j)
        M = metric_moments(space, space.J, "raw-moment")
        c = np.linalg.solve(M, (np.complex128(y) ** np.arange(space.J + 1)).conj())
        a = np.zeros(space.J + 1, dtype=complex)
        a[:deg + 1] = coeffs
        return float(abs(np.conj(c) @ M @ a - fy))
    z, w = _inner_product_rule(space, deg, n_theta)
    K = closed_form_kernel(space, y, z)
    f = np.polynomial.polynomial.polyval(z, coeffs)
    # the Gauss-Laguerre weights already carry exp(-|z|^2)
    ip = np.sum(w * np.conj(K) * f)
    return float(abs(ip - fy))


# ---------------------------------------------------------------- coherent states

def coherent_expand(space: RkhsSpace, y, J: int | None = None,
                    convention: str = "multiplication-raises") -> np.ndarray:
    """Coefficients of ``exp(y W)|0>`` in the normalized number basis.

    ``c_j = y^j * W[1,0] W[2,1] ... W[j,j-1] / j!``.  Under
    multiplication-raises this is ``y^j sqrt(M_jj / M_00) / j!`` (the
    Segal-Bargmann case gives ``y^j / sqrt(j!)``); under derivative-raises the
    Hardy case gives ``y^j``.
    """
    J = space.J if J is None else J
    space.check_domain(y)
    lad = ladder_operators(space, J, convention)
    a = np.diag(lad.W, -1)
    y = complex(y)
    logs = np.concatenate([[0.0], np.cumsum(np.log(np.abs(a)))]) - np.array([lgamma(j + 1) for j in range(J + 1)])
    phase = np.concatenate([[1.0], np.cumprod(np.sign(a))])
    c = np.exp(logs) * phase * y ** np.arange(J + 1)
    return c.astype(complex)


def eigen_residual(space: RkhsSpace, y, J: int | None = None,
                   convention: str = "multiplication-raises", interior: bool = True) -> float:
    """``||Z|y> - y|y>||`` on the interior block (or the full truncation)."""
    J = space.J if J is None else J
    c = coherent_expand(space, y, J, convention)
    Z = ladder_operators(space, J, convention).Z
    r = Z @ c - complex(y) * c
    if interior:
        r = r[:-1]
    return float(np.linalg.norm(r))
