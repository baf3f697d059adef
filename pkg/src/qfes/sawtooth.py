"""Classical and quantum sawtooth maps.

Hamiltonian ``H = p^2/2 - K q^2/2 * sum_j delta(t - j tau)`` on the torus
``-pi <= q < pi``, ``-pi <= p tau < pi``.

Quantum grid: ``q_j = -pi + 2 pi j / N`` and momenta ``p = hbar m`` with
``m in [-N/2, N/2)``, ``hbar = 2 pi / (N tau)``.  One quantum step applies
the kick phase in the position basis, transforms to momentum, applies the
free-flight phase and transforms back.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .algorithms import qft_gates
from .circuit import Circuit
from .gates import Gate
from .open_system import GateNoiseProfile, gkls_evolve
from .state import DensityMatrix, StateVector

__all__ = [
    "SawtoothParams", "ClassicalEnsemble", "EchoResult", "DiffusionResult",
    "wrap", "csm_step", "csm_run", "tangent_map", "lyapunov_exponent", "benettin_lyapunov",
    "position_grid", "momentum_indices", "kick_phases", "kinetic_phases",
    "qsm_step", "qsm_run", "qsm_dense_unitary", "qsm_circuit",
    "momentum_eigenstate", "coherent_state", "husimi_q", "husimi_average",
    "coarse_grain", "classical_histogram", "occupancy_overlap",
    "loschmidt_echo", "classify_decay", "momentum_diffusion",
]


def wrap(x, period=2 * np.pi):
    """Map into ``[-period/2, period/2)``."""
    return (np.asarray(x) + period / 2) % period - period / 2


@dataclass(frozen=True)
class SawtoothParams:
    K: float
    tau: float = 1.0
    n_qubits: int = 6

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.n_qubits < 1:
            raise ValueError(f"n_qubits must be >= 1, got {self.n_qubits}")

    @property
    def N(self) -> int:
        return 2 ** self.n_qubits

    @property
    def hbar(self) -> float:
        return 2 * np.pi / (self.N * self.tau)

    @property
    def p_period(self) -> float:
        return 2 * np.pi / self.tau

    def with_K(self, K: float) -> "SawtoothParams":
        return SawtoothParams(K, self.tau, self.n_qubits)


# ---------------------------------------------------------------- classical

@dataclass
class ClassicalEnsemble:
    """Phase-space points on the torus.

    ``p_unwrapped`` accumulates momentum without wrapping, for diffusion
    measurements; ``q`` and ``p`` are always in the fundamental domain.
    """

    q: np.ndarray
    p: np.ndarray
    tau: float = 1.0
    p_unwrapped: np.ndarray | None = None

    def __post_init__(self):
        self.q = wrap(np.asarray(self.q, float))
        p = np.asarray(self.p, float)
        if self.p_unwrapped is None:
            self.p_unwrapped = p.copy()
        self.p = wrap(p * self.tau) / self.tau

    @classmethod
    def line(cls, p0: float, n_points: int, tau: float = 1.0) -> "ClassicalEnsemble":
        """Points uniformly spread in ``q`` on the momentum surface ``p = p0``."""
        q = -np.pi + 2 * np.pi * (np.arange(n_points) + 0.5) / n_points
        return cls(q, np.full(n_points, float(p0)), tau)

    def __len__(self):
        return self.q.size

    def copy(self) -> "ClassicalEnsemble":
        return ClassicalEnsemble(self.q.copy(), self.p.copy(), self.tau, self.p_unwrapped.copy())


def csm_step(ens: ClassicalEnsemble, params: SawtoothParams, kick_first: bool = False) -> ClassicalEnsemble:
    """One step of the classical map.

    Default order is drift then kick (``q += p tau``; ``p += K q tau``).
    ``kick_first=True`` swaps the order to match :func:`qsm_step`.
    """
    K, tau = params.K, params.tau
    q, p, pu = ens.q, ens.p, ens.p_unwrapped
    if kick_first:
        dp = K * q * tau
        p, pu = p + dp, pu + dp
        q = wrap(q + p * tau)
    else:
        q = wrap(q + p * tau)
        dp = K * q * tau
        p, pu = p + dp, pu + dp
    return ClassicalEnsemble(q, p, tau, pu)


def csm_run(ens: ClassicalEnsemble, params: SawtoothParams, steps: int,
            kick_first: bool = False, record: bool = False):
    """Iterate the map; with ``record`` also return a ``(steps+1, 2, M)`` array of (q, p)."""
    hist = [np.stack([ens.q, ens.p])] if record else None
    for _ in range(steps):
        ens = csm_step(ens, params, kick_first)
        if record:
            hist.append(np.stack([ens.q, ens.p]))
    return (ens, np.array(hist)) if record else ens


def tangent_map(params: SawtoothParams) -> np.ndarray:
    K, tau = params.K, params.tau
    return np.array([[1.0, tau], [K * tau, 1.0 + K * tau ** 2]])


def lyapunov_exponent(params: SawtoothParams) -> float:
    """Log of the largest tangent-map eigenvalue modulus; exactly 0 when
    the eigenvalues sit on the unit circle (``-4 <= K tau^2 <= 0``)."""
    tr = 2.0 + params.K * params.tau ** 2
    if abs(tr) <= 2.0:
        return 0.0
    lam = (abs(tr) + np.sqrt(tr * tr - 4.0)) / 2.0
    return float(np.log(lam))


def benettin_lyapunov(params: SawtoothParams, steps: int = 2000, q0: float = 0.3,
                      p0: float = 0.1, delta: float = 1e-8) -> float:
    """Finite-difference two-trajectory estimate with per-step renormalization.

    Independent of :func:`tangent_map`: it only iterates the map itself.
    Steps where the pair straddles the force discontinuity are skipped.
    """
    a = ClassicalEnsemble([q0], [p0], params.tau)
    b = ClassicalEnsemble([q0 + delta], [p0], params.tau)
    total, used = 0.0, 0
    for _ in range(steps):
        a2, b2 = csm_step(a, params), csm_step(b, params)
        dq = wrap(b2.q - a2.q)[0]
        dp = wrap((b2.p - a2.p) * params.tau)[0] / params.tau
        d = np.hypot(dq, dp)
        if d < 1e3 * delta:
            total += np.log(d / delta)
            used += 1
            b = ClassicalEnsemble(a2.q + delta * dq / d, a2.p + delta * dp / d, params.tau)
        else:
            b = ClassicalEnsemble(a2.q + delta, a2.p, params.tau)
        a = a2
    return total / max(used, 1)


# ---------------------------------------------------------------- quantum

def position_grid(N: int) -> np.ndarray:
    return -np.pi + 2 * np.pi * np.arange(N) / N


def momentum_indices(N: int) -> np.ndarray:
    """Integer momenta ``m`` in FFT order, centred on ``[-N/2, N/2)``."""
    k = np.arange(N)
    return np.where(k < N // 2, k, k - N)


def kick_phases(params: SawtoothParams) -> np.ndarray:
    q = position_grid(params.N)
    return np.exp(0.5j * params.K * q ** 2 * params.tau / params.hbar)


def kinetic_phases(params: SawtoothParams) -> np.ndarray:
    """Free-flight phases ``exp(-i p^2 tau / 2 hbar)`` in FFT order."""
    m = momentum_indices(params.N)
    return np.exp(-0.5j * params.hbar * params.tau * m.astype(float) ** 2)


def _step_vec(psi: np.ndarray, kick: np.ndarray, kin: np.ndarray) -> np.ndarray:
    return np.fft.ifft(kin * np.fft.fft(kick * psi, norm="ortho"), norm="ortho")


def qsm_step(state: StateVector, params: SawtoothParams, inverse: bool = False) -> StateVector:
    """One quantum map step (or its exact inverse)."""
    if state.dim != params.N:
        raise ValueError(f"state dimension {state.dim} != N = {params.N}")
    kick, kin = kick_phases(params), kinetic_phases(params)
    if inverse:
        psi = np.conj(kick) * np.fft.ifft(np.conj(kin) * np.fft.fft(state.amps, norm="ortho"),
                                           norm="ortho")
    else:
        psi = _step_vec(state.amps, kick, kin)
    return StateVector(psi, state.dims)


def qsm_run(state: StateVector, params: SawtoothParams, steps: int, keep=None) -> list[np.ndarray]:
    """Iterate ``steps`` times; returns amplitude arrays for the step
    indices in ``keep`` (default: final only)."""
    keep = {steps} if keep is None else set(keep)
    kick, kin = kick_phases(params), kinetic_phases(params)
    psi = np.asarray(state.amps)
    out = [psi.copy()] if 0 in keep else []
    for t in range(1, steps + 1):
        psi = _step_vec(psi, kick, kin)
        if t in keep:
            out.append(psi)
    return out


def qsm_dense_unitary(params: SawtoothParams) -> np.ndarray:
    """Explicit matrix oracle built from the position/momentum change of basis."""
    N = params.N
    q = position_grid(N)
    m = np.arange(-N // 2, N // 2)
    F = np.exp(-1j * np.outer(m, q)) / np.sqrt(N)        # position -> momentum
    kin = np.exp(-0.5j * params.hbar * params.tau * m.astype(float) ** 2)
    kick = np.exp(0.5j * params.K * q ** 2 * params.tau / params.hbar)
    return F.conj().T @ np.diag(kin) @ F @ np.diag(kick)


def qsm_circuit(params: SawtoothParams) -> Circuit:
    """Gate-level map step: diagonal kick, inverse QFT, diagonal kinetic, QFT.

    The two diagonal phase layers are carried as full-register ``CU``
    payloads (desk-scale only).  The inverse QFT lands in FFT momentum
    order, where the kinetic phases are defined.
    """
    n = params.n_qubits
    qubits = list(range(n))
    c = Circuit(n)
    c.append(Gate("CU", qubits, unitary=np.diag(kick_phases(params))))
    c.extend(g.inverse() for g in reversed(qft_gates(qubits)))
    c.append(Gate("CU", qubits, unitary=np.diag(kinetic_phases(params))))
    c.extend(qft_gates(qubits))
    return c


def momentum_eigenstate(params: SawtoothParams, p0: float) -> StateVector:
    """Plane wave at the lattice momentum nearest ``p0``."""
    m = int(np.round(p0 / params.hbar))
    q = position_grid(params.N)
    return StateVector(np.exp(1j * m * q) / np.sqrt(params.N), (2,) * params.n_qubits)


def _n_images(hbar: float) -> int:
    # Gaussian envelope exp(-x^2 / 2 hbar) below 1e-17 beyond l image shifts
    return int(np.ceil((np.sqrt(2 * hbar * 40) + np.pi) / (2 * np.pi)))


def _coherent_vec(N: int, hbar: float, q0: float, p0: float) -> np.ndarray:
    q = position_grid(N)
    amp = np.zeros(N, dtype=complex)
    L = _n_images(hbar)
    for l in range(-L, L + 1):
        x = q - q0 + 2 * np.pi * l
        amp += np.exp(-x ** 2 / (2 * hbar) + 1j * p0 * x / hbar)
    return amp / np.linalg.norm(amp)


def coherent_state(params: SawtoothParams, q0: float, p0: float) -> StateVector:
    """Torus-periodized Gaussian wave packet with position variance ``hbar/2``."""
    return StateVector(_coherent_vec(params.N, params.hbar, q0, p0), (2,) * params.n_qubits)


def _husimi_batch(psis: np.ndarray, N: int, hbar: float, tau: float, nq: int, np_: int) -> np.ndarray:
    """Sum over ``psis`` rows of ``|<alpha|psi>|^2`` on the (nq, np_) grid.

    With ``p = hbar mu``, ``mu_k = -N/2 + k N/np_`` and the image sum
    ``alpha = sum_l G(q - q0 + 2 pi l) exp(i mu (q - q0 + 2 pi l))``, each
    image term is a length-``np_`` DFT of ``G_l psi (-1)^j`` folded modulo
    ``np_``; images are then combined with phases ``exp(-2 pi i mu l)``.
    """
    q = position_grid(N)
    qa = -np.pi + 2 * np.pi * np.arange(nq) / nq
    mu = -N / 2 + np.arange(np_) * N / np_
    L = _n_images(hbar)
    ls = np.arange(-L, L + 1)
    img = np.exp(-2j * np.pi * np.outer(ls, mu))                 # (nl, np_)
    sign = (-1.0) ** np.arange(N)
    width = -(-N // np_) * np_
    out = np.zeros((nq, np_))
    chunk = max(1, 2 ** 21 // (len(ls) * max(N, np_)))
    for a in range(0, nq, chunk):
        q0 = qa[a:a + chunk]
        x = q[None, None, :] - q0[None, :, None] + 2 * np.pi * ls[:, None, None]
        G = np.exp(-x ** 2 / (2 * hbar))                          # (nl, c, N)
        # ||alpha||^2 per (q0, mu): sum_{l,l'} C_{ll'} e^{-2 pi i mu (l - l')}
        C = np.einsum("acj,bcj->cab", G, G)
        nrm = np.real(np.einsum("cab,ak,bk->ck", C, img, img.conj()))
        for psi in psis:
            y = G * (psi * sign)[None, None, :]
            if width > N:
                y = np.concatenate([y, np.zeros(y.shape[:2] + (width - N,))], axis=2)
            y = y.reshape(y.shape[0], y.shape[1], width // np_, np_).sum(axis=2)
            f = np.fft.fft(y, axis=2)                             # (nl, c, np_)
            amp = np.einsum("lck,lk->ck", f, img)
            out[a:a + chunk] += np.abs(amp) ** 2 / nrm
    return out


def husimi_q(state: StateVector | np.ndarray, params: SawtoothParams,
             grid: tuple[int, int] = (64, 64)):
    """Husimi distribution on a ``(Nq, Np)`` grid.

    Returns ``(q_axis, p_axis, Q)`` with ``Q[i, k] = |<alpha_{q_i,p_k}|psi>|^2 / (2 pi hbar)``
    so that ``sum Q dq dp`` is close to one.  Grid nodes are
    ``q_i = -pi + 2 pi i / Nq`` and ``p_k tau = -pi + 2 pi k / Np``.
    """
    nq, np_ = grid
    if nq < 8 or np_ < 8:
        raise ValueError("Husimi grid resolution must be >= 8 in each direction")
    psi = np.asarray(state.amps if isinstance(state, StateVector) else state)
    qa = -np.pi + 2 * np.pi * np.arange(nq) / nq
    pa = (-np.pi + 2 * np.pi * np.arange(np_) / np_) / params.tau
    Q = _husimi_batch(psi[None, :], params.N, params.hbar, params.tau, nq, np_)
    return qa, pa, Q / (2 * np.pi * params.hbar)


def husimi_average(states, params: SawtoothParams, grid=(64, 64)) -> np.ndarray:
    """Husimi field averaged over a sequence of states (e.g. the last steps of a run)."""
    psis = np.array([np.asarray(s.amps if isinstance(s, StateVector) else s) for s in states])
    Q = _husimi_batch(psis, params.N, params.hbar, params.tau, *grid)
    return Q / (len(psis) * 2 * np.pi * params.hbar)


def coarse_grain(field: np.ndarray, bins: int = 32) -> np.ndarray:
    """Block-sum a 2-D field down to ``bins x bins`` and normalize to unit total."""
    a, b = field.shape
    if a % bins or b % bins:
        raise ValueError(f"grid {field.shape} not divisible by {bins}")
    c = field.reshape(bins, a // bins, bins, b // bins).sum(axis=(1, 3))
    return c / c.sum()


def classical_histogram(q: np.ndarray, p: np.ndarray, tau: float = 1.0, bins: int = 32) -> np.ndarray:
    edges = np.linspace(-np.pi, np.pi, bins + 1)
    h, _, _ = np.histogram2d(np.ravel(q), np.ravel(p) * tau, bins=[edges, edges])
    return h / h.sum()


def occupancy_overlap(a: np.ndarray, b: np.ndarray) -> float:
    """Bhattacharyya coefficient of two normalized occupancy grids (1 = identical)."""
    return float(np.sum(np.sqrt(np.clip(a, 0, None) * np.clip(b, 0, None))))


# ---------------------------------------------------------------- echo

@dataclass
class EchoResult:
    t: np.ndarray
    F: np.ndarray
    regime: str
    rate: float
    exponent: float
    r2_exponential: float
    r2_algebraic: float
    window: tuple[int, int]
    meta: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"regime": self.regime, "rate": self.rate, "exponent": self.exponent,
                "r2_exponential": self.r2_exponential, "r2_algebraic": self.r2_algebraic,
                "window": list(self.window), **self.meta}


def _r2(x, y):
    if x.size < 3:
        return 0.0, np.nan
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    ss = np.sum((y - y.mean()) ** 2)
    return (1.0 - np.sum(res ** 2) / ss if ss > 0 else 1.0), coef[0]


def classify_decay(t: np.ndarray, F: np.ndarray, floor: float, perturbative_tol: float = 1e-3):
    """Fit ``log F`` against ``t`` and against ``log t`` above ``floor``.

    Returns ``(regime, rate, exponent, r2_exp, r2_alg, window)``.  A series
    that never drops by more than ``perturbative_tol`` is labelled perturbative.
    """
    t = np.asarray(t, float)
    F = np.clip(np.asarray(F, float), 1e-300, None)
    if np.all(1 - F <= perturbative_tol):
        return "perturbative", 0.0, 0.0, 1.0, 1.0, (int(t[0]), int(t[-1]))
    mask = F > floor
    # stop at the first crossing of the plateau
    stop = np.argmin(mask) if not mask.all() else mask.size
    stop = max(stop, 3)
    tt, ff = t[:stop], np.log(F[:stop])
    r2e, se = _r2(tt, ff)
    r2a, sa = _r2(np.log(tt), ff)
    regime = "exponential" if r2e >= r2a else "algebraic"
    return regime, float(-se), float(-sa), float(r2e), float(r2a), (int(tt[0]), int(tt[-1]))


def loschmidt_echo(state0: StateVector, params: SawtoothParams, T: int, eps: float = 0.0,
                   seed: int | None = None, noise: GateNoiseProfile | None = None,
                   step_time: float = 1.0) -> EchoResult:
    """Forward/backward fidelity echo.

    Unitary mode: forward steps use ``K + eps_t`` and the reversal uses
    independently drawn ``K + eps'_t`` (uniform in ``[-eps, eps]``), so
    ``F(t) = |<V_t...V_1 psi0 | U_t...U_1 psi0>|^2``, computed in O(T) steps.

    Lindblad mode (``noise`` given): every map step, forward and backward,
    is followed by a GKLS segment of length ``step_time`` with all qubits
    active.  This costs O(T^2) density-matrix steps; keep ``n`` small.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    rng = np.random.default_rng(seed)
    N = params.N
    t = np.arange(1, T + 1)
    if noise is None:
        fw = rng.uniform(-eps, eps, T) if eps > 0 else np.zeros(T)
        bw = rng.uniform(-eps, eps, T) if eps > 0 else np.zeros(T)
        kin = kinetic_phases(params)
        q2 = position_grid(N) ** 2 * 0.5 * params.tau / params.hbar
        u = v = np.asarray(state0.amps)
        F = np.empty(T)
        for i in range(T):
            u = _step_vec(u, np.exp(1j * (params.K + fw[i]) * q2), kin)
            v = _step_vec(v, np.exp(1j * (params.K + bw[i]) * q2), kin)
            F[i] = abs(np.vdot(v, u)) ** 2
        meta = {"mode": "unitary", "eps": eps}
    else:
        n = params.n_qubits
        model = noise.model(n, active=range(n))
        U = qsm_dense_unitary(params)
        psi0 = np.asarray(state0.amps)
        rho = np.outer(psi0, psi0.conj())
        F = np.empty(T)
        dims = (2,) * n
        for i in range(T):
            rho = U @ rho @ U.conj().T
            rho = gkls_evolve(DensityMatrix(rho, dims), model, step_time, check_positivity=False)[-1].rho
            back = rho
            for _ in range(i + 1):
                back = U.conj().T @ back @ U
                back = gkls_evolve(DensityMatrix(back, dims), model, step_time,
                                   check_positivity=False)[-1].rho
            F[i] = float(np.real(np.vdot(psi0, back @ psi0)))
        meta = {"mode": "lindblad"}
    F = np.clip(F, 0.0, 1.0)
    regime, rate, expo, r2e, r2a, win = classify_decay(t, F, floor=10.0 / N)
    return EchoResult(t, F, regime, rate, expo, r2e, r2a, win, meta)


# ---------------------------------------------------------------- diffusion

@dataclass
class DiffusionResult:
    D: float
    window: tuple[int, int]
    t: np.ndarray
    msd: np.ndarray
    saturated: bool


def momentum_diffusion(initial, params: SawtoothParams, T: int, kick_first: bool = True,
                       saturation_fraction: float = 0.5, t_max: int | None = None) -> DiffusionResult:
    """Fit ``<(p - p0)^2>`` against ``t`` and return half the slope.

    ``initial`` is a :class:`ClassicalEnsemble` (unwrapped momenta are used)
    or a :class:`StateVector` (momentum is periodic, so the displacement is
    wrapped to the Brillouin zone and only points below
    ``saturation_fraction`` of the uniform-spread value ``(2 pi / tau)^2 / 12``
    enter the fit).  ``t_max`` caps the fit window, e.g. to compare a
    classical run on the window found for a quantum one.
    """
    t = np.arange(T + 1)
    tau = params.tau
    if isinstance(initial, ClassicalEnsemble):
        ens = initial.copy()
        p0 = ens.p_unwrapped.copy()
        msd = [0.0]
        for _ in range(T):
            ens = csm_step(ens, params, kick_first)
            msd.append(float(np.mean((ens.p_unwrapped - p0) ** 2)))
        msd = np.array(msd)
        limit = np.inf
    else:
        N = params.N
        m = momentum_indices(N)
        probs0 = np.abs(np.fft.fft(initial.amps, norm="ortho")) ** 2
        mbar = np.angle(np.sum(probs0 * np.exp(2j * np.pi * m / N))) * N / (2 * np.pi)
        dp = wrap((m - mbar) * params.hbar * tau) / tau
        states = qsm_run(initial, params, T, keep=range(T + 1))
        msd = np.array([np.sum(np.abs(np.fft.fft(s, norm="ortho")) ** 2 * dp ** 2) for s in states])
        msd = msd - msd[0]
        limit = saturation_fraction * (2 * np.pi / tau) ** 2 / 12
    ok = msd < limit
    if t_max is not None:
        ok &= t <= t_max
    stop = int(np.argmin(ok)) if not ok.all() else ok.size
    saturated = stop < ok.size
    if stop < 5:
        warnings.warn(f"momentum spread saturates after {stop} points; fit uses fewer than 5")
    tt, mm = t[:max(stop, 2)], msd[:max(stop, 2)]
    slope = np.polyfit(tt, mm, 1)[0]
    return DiffusionResult(float(slope / 2), (int(tt[0]), int(tt[-1])), t, msd, saturated)
