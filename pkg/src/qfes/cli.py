"""``qfes <kind> --config FILE [--set key=value]... --out DIR --seed N``

Writes one or more CSV files plus ``manifest.json`` (config echo, package
version, wall-clock time, SHA-256 of every output).  Exit codes: 0 success,
2 configuration error, 3 runtime failure.  ``QFES_THREADS`` caps the BLAS
thread pools.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .config import KINDS, ConfigError, RunConfig, parse_config

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: Path, header: list[str], columns: list) -> None:
    """Columns of equal length; floats with 17 significant digits."""
    n = len(columns[0])
    if any(len(c) != n for c in columns):
        raise ValueError("CSV columns differ in length")
    lines = [",".join(header)]
    for i in range(n):
        lines.append(",".join(_fmt(c[i]) for c in columns))
    path.write_text("\n".join(lines) + "\n")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------- experiments
# each returns (dict of csv name -> (header, columns), results dict)

def _noise_profile(cfg: RunConfig):
    from .open_system import GateNoiseProfile
    return GateNoiseProfile(**cfg.noise) if cfg.noise is not None else None


def run_ghz(cfg: RunConfig):
    from .circuit import ghz_circuit, run_circuit
    from .open_system import noisy_circuit_run
    from .state import StateVector, measure_samples
    n, shots = cfg.params["n"], cfg.params["shots"]
    circ = ghz_circuit(n)
    prof = _noise_profile(cfg)
    psi0 = StateVector.zeros(n)
    if prof is None:
        counts = measure_samples(run_circuit(psi0, circ), shots, cfg.seed)
        res = {"backend": "ideal"}
    else:
        run = noisy_circuit_run(psi0, circ, prof)
        p = np.clip(np.real(np.diag(run.states[-1].rho)), 0, None)
        c = np.random.default_rng(cfg.seed).multinomial(shots, p / p.sum())
        counts = {format(i, f"0{n}b"): int(c[i]) for i in np.flatnonzero(c)}
        res = {"backend": "gate-noise", "final_fidelity": float(run.fidelities[-1])}
    keys = sorted(counts)
    return {"counts.csv": (["bitstring", "count"], [keys, [counts[k] for k in keys]])}, res


def run_qft_check(cfg: RunConfig):
    from .algorithms import qft_circuit
    rows = {"n": [], "max_error": [], "gate_count": [], "expected_count": []}
    for n in range(1, cfg.params["n_max"] + 1):
        N = 2 ** n
        F = np.exp(2j * np.pi * np.outer(np.arange(N), np.arange(N)) / N) / np.sqrt(N)
        c = qft_circuit(n)
        rows["n"].append(n)
        rows["max_error"].append(float(np.max(np.abs(c.unitary() - F))))
        rows["gate_count"].append(len(c))
        rows["expected_count"].append(n * (n + 1) // 2 + n // 2)
    ok = all(e <= 1e-10 for e in rows["max_error"]) and rows["gate_count"] == rows["expected_count"]
    return {"qft.csv": (list(rows), list(rows.values()))}, {"pass": bool(ok)}


def run_qpe(cfg: RunConfig):
    from .algorithms import phase_estimation
    m, frac = cfg.params["m_bits"], cfg.params["phase"]
    U = np.diag([1.0, np.exp(2j * np.pi * frac)])
    est = phase_estimation(U, np.array([0, 1], dtype=complex), m)
    idx = np.arange(2 ** m)
    return ({"distribution.csv": (["index", "phase", "probability"],
                                  [idx, 2 * np.pi * idx / 2 ** m, est.distribution])},
            {"estimate": est.phase, "bits": est.bits, "true_phase": 2 * np.pi * frac})


def run_qae(cfg: RunConfig):
    from .algorithms import GroverWalk, OracleSpec, amplitude_estimate
    p = cfg.params
    N = 2 ** p["n_qubits"]
    if p["marked"] is not None:
        marked = sorted(set(p["marked"]))
    else:
        rng = np.random.default_rng(cfg.seed)
        marked = sorted(int(x) for x in rng.choice(N, p["n_marked"], replace=False))
    walk = GroverWalk(OracleSpec(N, frozenset(marked)))
    est = amplitude_estimate(walk, p["m_bits"])
    idx = np.arange(2 ** p["m_bits"])
    truth = len(marked) / N
    return ({"distribution.csv": (["index", "amplitude", "probability"],
                                  [idx, np.sin(np.pi * idx / 2 ** p["m_bits"]) ** 2, est.distribution])},
            {"estimate": est.estimate, "truth": truth, "marked": marked,
             "error": abs(est.estimate - truth), "bound": est.bound})


def run_gkls(cfg: RunConfig):
    from .open_system import DEPHASE, SIGMA_MINUS, LindbladModel, gkls_evolve
    from .state import DensityMatrix
    p = cfg.params
    nu, T, n_out = p["nu"], p["t_final"], p["n_out"]
    if p["process"] == "dephasing":
        rho0 = np.full((2, 2), 0.5, dtype=complex)
        model = LindbladModel(np.zeros((2, 2)), [(DEPHASE, nu)])
    else:
        rho0 = np.diag([0.0, 1.0]).astype(complex)
        model = LindbladModel(np.zeros((2, 2)), [(SIGMA_MINUS, nu)])
    snaps = gkls_evolve(DensityMatrix(rho0), model, T, n_out)
    t = np.linspace(0, T, n_out + 1)
    r = np.array([s.rho for s in snaps])
    if p["process"] == "dephasing":
        exact = 0.5 * np.exp(-nu * t)
        dev = np.max(np.abs(r[:, 0, 1] - exact))
    else:
        exact = np.exp(-nu * t)
        dev = np.max(np.abs(r[:, 1, 1].real - exact))
    cols = [t, r[:, 0, 0].real, r[:, 1, 1].real, r[:, 0, 1].real, r[:, 0, 1].imag, exact]
    return ({"rho.csv": (["t", "rho00", "rho11", "re_rho01", "im_rho01", "analytic"], cols)},
            {"max_deviation": float(dev),
             "trace_drift": float(np.max(np.abs(np.trace(r, axis1=1, axis2=2) - 1)))})


def run_sawtooth(cfg: RunConfig):
    from .sawtooth import (ClassicalEnsemble, SawtoothParams, classical_histogram, coarse_grain,
                           csm_run, husimi_average, lyapunov_exponent, momentum_eigenstate,
                           occupancy_overlap, qsm_run)
    p = cfg.params
    par = SawtoothParams(p["K"], p["tau"], p["n"])
    p0 = p["p0_over_pi"] * np.pi
    T, avg = p["steps"], p["average"]
    ens = ClassicalEnsemble.line(p0, p["ensemble"], par.tau)
    _, hist = csm_run(ens, par, T, kick_first=True, record=True)
    tail = hist[T - avg + 1:]
    steps = np.repeat(np.arange(T - avg + 1, T + 1), tail.shape[2])
    states = qsm_run(momentum_eigenstate(par, p0), par, T, keep=range(T - avg + 1, T + 1))
    g = p["grid"]
    Q = husimi_average(states, par, (g, g))
    qa = -np.pi + 2 * np.pi * np.arange(g) / g
    pa = qa / par.tau
    qq, pp = np.meshgrid(qa, pa, indexing="ij")
    res = {"hbar": par.hbar, "lyapunov": lyapunov_exponent(par),
           "husimi_mass": float(Q.sum() * (2 * np.pi / g) ** 2 / par.tau)}
    if g % 32 == 0:
        res["overlap_32"] = occupancy_overlap(coarse_grain(Q, 32),
                                              classical_histogram(tail[:, 0], tail[:, 1], par.tau, 32))
    return ({"poincare.csv": (["step", "q", "p"], [steps, tail[:, 0].ravel(), tail[:, 1].ravel()]),
             "husimi.csv": (["q", "p", "Q"], [qq.ravel(), pp.ravel(), Q.ravel()])}, res)


def run_echo(cfg: RunConfig):
    from .sawtooth import SawtoothParams, coherent_state, loschmidt_echo
    p = cfg.params
    par = SawtoothParams(p["K"], p["tau"], p["n"])
    psi0 = coherent_state(par, p["q0"], p["p0"])
    res = loschmidt_echo(psi0, par, p["steps"], p["eps"], seed=cfg.seed,
                         noise=_noise_profile(cfg), step_time=p["step_time"])
    return {"echo.csv": (["t", "F"], [res.t, res.F])}, {"fit": res.summary()}


def run_threewave(cfg: RunConfig):
    from .threewave import (build_subspace_hamiltonian, occupation_expectations, propagate,
                            verify_moment_equation)
    p = cfg.params
    g = complex(p["g_re"], p["g_im"])
    # the config layer has already put s2 >= s3; relabelled tracks the swap
    H, sub = build_subspace_hamiltonian(p["s2"], p["s3"], g)
    psi0 = np.zeros(sub.D, dtype=complex)
    psi0[p["j0"]] = 1.0
    traj = propagate(H, psi0, p["dt"], p["steps"])
    o = occupation_expectations(traj, sub)
    n2, n3 = (o["n3"], o["n2"]) if p["relabelled"] else (o["n2"], o["n3"])
    c = 2 * sub.s2 + 2 * sub.s3 + 1
    rhs = 2 * abs(g) ** 2 * (sub.s2 * sub.s3 - c * o["n1"] + 3 * o["n1sq"])
    d2 = np.full(traj.shape[0], np.nan)
    if sub.D > 0:
        d2[1:-1] = (o["n1"][2:] - 2 * o["n1"][1:-1] + o["n1"][:-2]) / p["dt"] ** 2
    t = p["dt"] * np.arange(traj.shape[0])
    check = verify_moment_equation(traj, sub, p["dt"]) if traj.shape[0] >= 5 else {}
    return ({"threewave.csv": (["t", "n1", "n2", "n3", "residual"], [t, o["n1"], n2, n3, d2 - rhs])},
            {"D": sub.D, "s2": sub.s2, "s3": sub.s3, **check})


def _packet(grid, z0, sigma):
    z = grid.coords()
    amp = np.exp(-np.sum((z - np.reshape(z0, (-1, 1))) ** 2, axis=0) / (4 * sigma ** 2))
    return amp


def run_kvn(cfg: RunConfig):
    from .embed import PeriodicGrid, ThetaStepper, VectorField, kvn_hamiltonian
    p = cfg.params
    grid = PeriodicGrid.cube(-p["L"], p["L"], p["grid"], 1)
    field = VectorField.linear_decay(p["gamma"])
    psi = _packet(grid, [p["z0"]], p["sigma"]).astype(complex)
    psi /= np.linalg.norm(psi)
    n_steps = int(round(p["t_final"] / p["dt"]))
    per = max(n_steps // p["n_out"], 1)
    dt = p["t_final"] / n_steps
    step = ThetaStepper(-1j * kvn_hamiltonian(grid, field), dt, p["theta_scheme"])
    z = grid.coords()[0]
    t, mean, norm = [0.0], [float(np.sum(z * np.abs(psi) ** 2))], [1.0]
    done = 0
    while done < n_steps:
        k = min(per, n_steps - done)
        psi = step(psi, k)
        done += k
        t.append(done * dt)
        w = np.abs(psi) ** 2
        norm.append(float(np.sqrt(w.sum())))
        mean.append(float(np.sum(z * w) / w.sum()))
    t = np.array(t)
    exact = mean[0] * np.exp(-p["gamma"] * t)
    rel = np.abs(np.array(mean) - exact) / np.abs(exact)
    return ({"kvn.csv": (["t", "mean_z", "analytic", "norm"], [t, mean, exact, norm])},
            {"max_relative_error": float(rel.max()), "max_norm_drift": float(np.max(np.abs(np.array(norm) - 1)))})


def run_liouville(cfg: RunConfig):
    from .embed import PeriodicGrid, ThetaStepper, VectorField, liouville_generator
    from .embed.linear import CFLError, _courant, theta_value
    p = cfg.params
    dim = 1 if p["field"] == "decay" else 2
    grid = PeriodicGrid.cube(-p["L"], p["L"], p["grid"], dim)
    field = VectorField.linear_decay(p["gamma"]) if dim == 1 else VectorField.rotation(p["gamma"])
    z0 = [p["z0"]] if dim == 1 else [p["z0"], 0.0]
    f = _packet(grid, z0, p["sigma"]) ** 2
    f /= grid.integrate(f)
    n_steps = int(round(p["t_final"] / p["dt"]))
    dt = p["t_final"] / n_steps
    th = theta_value(p["theta_scheme"])
    c = _courant(grid, field.on_grid(grid), dt)
    if th < 0.5 and c > 1:
        raise CFLError(f"Courant number {c:.3g} > 1 with theta={th} < 1/2")
    step = ThetaStepper(liouville_generator(grid, field), dt, th)
    per = max(n_steps // p["n_out"], 1)
    z = grid.coords()
    t, mass, mq = [0.0], [grid.integrate(f)], [grid.integrate(z[0] * f)]
    done = 0
    while done < n_steps:
        k = min(per, n_steps - done)
        f = step(f, k)
        done += k
        t.append(done * dt)
        mass.append(grid.integrate(f))
        mq.append(grid.integrate(z[0] * f) / mass[-1])
    return ({"liouville.csv": (["t", "mass", "mean_z1"], [t, mass, mq])},
            {"max_mass_drift": float(np.max(np.abs(np.array(mass) - mass[0])))})


def run_carleman(cfg: RunConfig):
    from .embed import carleman_propagate
    p = cfg.params
    r = carleman_propagate(p["coeffs"], p["z0"], p["dt"], p["steps"], p["order"], rescale=p["rescale"])
    z, ref = np.real_if_close(r.z), np.real_if_close(r.reference)
    if np.iscomplexobj(z) or np.iscomplexobj(ref):
        cols = [r.t, np.real(r.z), np.imag(r.z), np.real(r.reference), np.imag(r.reference), r.tail]
        head = ["t", "re_z", "im_z", "re_reference", "im_reference", "tail"]
    else:
        cols, head = [r.t, z, ref, r.tail], ["t", "z", "reference", "tail"]
    return ({"carleman.csv": (head, cols)},
            {"max_error": r.max_error, "scale": r.scale, "domain_exit": r.domain_exit})


def run_rkhs(cfg: RunConfig):
    from .rkhs import NAMED_SPACES, RkhsSpace, ladder_operators, metric_moments
    p = cfg.params
    J = p["J"]
    cols = [[] for _ in range(5)]
    ccr = {}
    for name in NAMED_SPACES:
        sp = RkhsSpace.named(name, J, p["metric"])
        rho = np.diag(metric_moments(sp))
        lad = ladder_operators(sp, J, p["convention"])
        W = np.concatenate([[0.0], np.diag(lad.W, -1)])
        Z = np.concatenate([[0.0], np.diag(lad.Z, 1)])
        ccr[name] = lad.ccr_residual()
        for j in range(J + 1):
            for c, v in zip(cols, (name, j, rho[j], W[j], Z[j])):
                c.append(v)
    return ({"rkhs.csv": (["space", "j", "rho_jj", "W_j_jm1", "Z_jm1_j"], cols)}, {"ccr_residual": ccr})


RUNNERS = {
    "ghz": run_ghz, "qft-check": run_qft_check, "qpe": run_qpe, "qae": run_qae,
    "gkls": run_gkls, "sawtooth-run": run_sawtooth, "sawtooth-echo": run_echo,
    "threewave": run_threewave, "embed-kvn": run_kvn, "embed-liouville": run_liouville,
    "embed-carleman": run_carleman, "rkhs-table": run_rkhs,
}


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def execute(cfg: RunConfig) -> dict:
    """Run one experiment, write its outputs and return the manifest."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    tables, results = RUNNERS[cfg.kind](cfg)
    checksums = {}
    for name, (header, columns) in tables.items():
        path = out / name
        write_csv(path, header, columns)
        checksums[name] = _sha256(path)
    if cfg.kind == "sawtooth-echo":
        path = out / "fit.json"
        path.write_text(json.dumps(results["fit"], indent=2, sort_keys=True, default=_json_default) + "\n")
        checksums["fit.json"] = _sha256(path)
    manifest = {
        "config": cfg.echo(),
        "version": __version__,
        "wall_clock_seconds": time.perf_counter() - t0,
        "outputs": checksums,
        "results": results,
        "notices": cfg.notices,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True,
                                                  default=_json_default) + "\n")
    return manifest


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qfes", description="Quantum-dynamics simulation experiments.")
    ap.add_argument("kind", choices=KINDS)
    ap.add_argument("--config", help="INI file with [run], [params] and [noise] sections")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a parameter (noise.KEY for the noise section)")
    ap.add_argument("--out", help="output directory (default: [run] out or '.')")
    ap.add_argument("--seed", help="64-bit unsigned seed")
    return ap


def _threads() -> int | None:
    raw = os.environ.get("QFES_THREADS")
    if raw in (None, ""):
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"QFES_THREADS={raw!r}: expected a positive integer") from None
    if n < 1:
        raise ConfigError(f"QFES_THREADS={raw}: constraint violated: >= 1")
    return n


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = parse_config(args.kind, args.config, args.set, args.seed, args.out)
        threads = _threads()
    except ConfigError as exc:
        print(f"qfes: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for note in cfg.notices:
        print(f"qfes: notice: {note}", file=sys.stderr)
    try:
        with threadpool_limits(limits=threads):
            manifest = execute(cfg)
    except Exception as exc:                    # surfaced with context, never a traceback
        print(f"qfes: runtime error in {cfg.kind}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(json.dumps({"kind": cfg.kind, "out": cfg.out, "outputs": manifest["outputs"]}, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
