"""Periodic uniform grids, finite-difference operators and vector fields."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

__all__ = ["PeriodicGrid", "VectorField", "central_difference"]


def central_difference(n: int, h: float) -> sparse.csr_matrix:
    """Periodic ``d/dx`` by central differences (real antisymmetric)."""
    if n < 3:
        raise ValueError("central differences need at least 3 points")
    e = np.ones(n) / (2 * h)
    D = sparse.diags([e[:-1], -e[:-1]], [1, -1], shape=(n, n), format="lil")
    D[0, n - 1] = -1 / (2 * h)
    D[n - 1, 0] = 1 / (2 * h)
    return D.tocsr()


@dataclass(frozen=True)
class PeriodicGrid:
    """Tensor grid on the box ``prod [lo_i, hi_i)`` with ``n_i`` points per axis.

    Flattened arrays use C order with ``indexing='ij'``.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    @classmethod
    def cube(cls, lo: float, hi: float, n: int, dim: int = 1) -> "PeriodicGrid":
        return cls((lo,) * dim, (hi,) * dim, (n,) * dim)

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(x) for x in np.atleast_1d(self.lo)))
        object.__setattr__(self, "hi", tuple(float(x) for x in np.atleast_1d(self.hi)))
        object.__setattr__(self, "n", tuple(int(x) for x in np.atleast_1d(self.n)))
        if not len(self.lo) == len(self.hi) == len(self.n):
            raise ValueError("lo, hi, n must have equal length")
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError("need hi > lo on every axis")

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def size(self) -> int:
        return int(np.prod(self.n))

    @property
    def spacing(self) -> np.ndarray:
        return np.array([(h - l) / n for l, h, n in zip(self.lo, self.hi, self.n)])

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axes(self) -> list[np.ndarray]:
        return [l + (h - l) * np.arange(n) / n for l, h, n in zip(self.lo, self.hi, self.n)]

    def coords(self) -> np.ndarray:
        """``(dim, size)`` array of grid-point coordinates."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack([m.ravel() for m in mesh])

    def derivative(self, axis: int) -> sparse.csr_matrix:
        mats = [sparse.identity(n, format="csr") for n in self.n]
        mats[axis] = central_difference(self.n[axis], self.spacing[axis])
        out = mats[0]
        for m in mats[1:]:
            out = sparse.kron(out, m, format="csr")
        return out

    def momentum(self, axis: int) -> sparse.csr_matrix:
        """Hermitian ``-i d/dx_axis``."""
        return (-1j * self.derivative(axis)).tocsr()

    def integrate(self, f: np.ndarray) -> float:
        return float(np.sum(f) * self.cell_volume)


@dataclass(frozen=True)
class VectorField:
    """Velocity field ``dz/dt = V(t, z)``.

    ``evaluate(t, z)`` takes ``z`` of shape ``(dim, ...)`` and returns the
    same shape.  ``poly`` optionally lists 1-D coefficients ``c_m`` of
    ``V = sum_m c_m z^m`` (index ``m`` = power).
    """

    dim: int
    evaluate: Callable[[float, np.ndarray], np.ndarray]
    divergence: Callable[[float, np.ndarray], np.ndarray] | None = None
    poly: tuple[complex, ...] | None = None

    def __call__(self, t, z):
        return self.evaluate(t, z)

    @classmethod
    def polynomial(cls, coeffs: Sequence[complex]) -> "VectorField":
        c = tuple(coeffs)
        if not c or all(x == 0 for x in c):
            raise ValueError("empty polynomial field")
        dc = tuple(m * c[m] for m in range(1, len(c)))

        def ev(t, z):
            return np.polynomial.polynomial.polyval(z, c)

        def div(t, z):
            return np.polynomial.polynomial.polyval(z[0], dc)[None] if dc else np.zeros_like(z)

        return cls(1, ev, div, c)

    @classmethod
    def linear_decay(cls, gamma: float) -> "VectorField":
        f = cls.polynomial([0.0, -gamma])
        return cls(1, f.evaluate, lambda t, z: np.full(np.shape(z)[1:], -gamma), f.poly)

    @classmethod
    def rotation(cls, omega: float = 1.0) -> "VectorField":
        """Harmonic flow ``(q, p) -> (omega p, -omega q)``; divergence free."""
        return cls(2, lambda t, z: np.stack([omega * z[1], -omega * z[0]]),
                   lambda t, z: np.zeros(np.shape(z)[1:]))

    @classmethod
    def hamiltonian(cls, dHdq: Callable, dHdp: Callable) -> "VectorField":
        return cls(2, lambda t, z: np.stack([dHdp(z[0], z[1]), -dHdq(z[0], z[1])]),
                   lambda t, z: np.zeros(np.shape(z)[1:]))

    def on_grid(self, grid: PeriodicGrid, t: float = 0.0) -> np.ndarray:
        if grid.dim != self.dim:
            raise ValueError(f"field dimension {self.dim} != grid dimension {grid.dim}")
        return np.asarray(self.evaluate(t, grid.coords())).reshape(self.dim, -1)
