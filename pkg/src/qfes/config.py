"""Run configuration: a sectioned key-value file plus command-line overrides.

File layout::

    [run]              ; optional: kind, seed, out
    kind = sawtooth-echo
    seed = 7

    [params]           ; kind-specific keys, see SCHEMAS
    K = 0.5
    n = 8

    [noise]            ; gate-noise profile, only for kinds that accept it
    dephase = 0.1

Every key is checked against the schema for the experiment kind; unknown
keys, unparsable values and violated constraints raise :class:`ConfigError`
naming the key and the constraint.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

__all__ = ["ConfigError", "Param", "SCHEMAS", "NOISE_SCHEMA", "NOISE_KINDS", "KINDS",
           "RunConfig", "parse_config", "parse_value"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Param:
    type: str                                  # int, float, str, bool, ints, floats
    default: Any = None
    check: Callable[[Any], bool] | None = None
    constraint: str = ""
    choices: tuple[str, ...] | None = None
    required: bool = False


def _pos(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def P(type_, default=None, check=None, constraint="", choices=None, required=False) -> Param:
    return Param(type_, default, check, constraint, choices, required)


THETA = ("explicit", "crank-nicolson", "implicit")

SCHEMAS: dict[str, dict[str, Param]] = {
    "ghz": {
        "n": P("int", 3, lambda n: 2 <= n <= 16, "2 <= n <= 16"),
        "shots": P("int", 1024, _pos, "shots >= 1"),
    },
    "qft-check": {
        "n_max": P("int", 6, lambda n: 1 <= n <= 10, "1 <= n_max <= 10"),
    },
    "qpe": {
        "phase": P("float", 0.3125, lambda x: 0 <= x < 1, "0 <= phase < 1 (fraction of 2 pi)"),
        "m_bits": P("int", 4, lambda m: 1 <= m <= 12, "1 <= m_bits <= 12"),
    },
    "qae": {
        "n_qubits": P("int", 6, lambda n: 1 <= n <= 12, "1 <= n_qubits <= 12"),
        "marked": P("ints", None, lambda v: all(x >= 0 for x in v), "marked indices >= 0"),
        "n_marked": P("int", 1, _nonneg, "n_marked >= 0"),
        "m_bits": P("int", 6, lambda m: 1 <= m <= 12, "1 <= m_bits <= 12"),
    },
    "gkls": {
        "process": P("str", "dephasing", choices=("dephasing", "relaxation")),
        "nu": P("float", 1.0, _pos, "nu > 0"),
        "t_final": P("float", 5.0, _pos, "t_final > 0"),
        "n_out": P("int", 50, _pos, "n_out >= 1"),
    },
    "sawtooth-run": {
        "K": P("float", required=True),
        "n": P("int", 6, lambda n: 2 <= n <= 14, "2 <= n <= 14"),
        "steps": P("int", 500, _pos, "steps >= 1"),
        "tau": P("float", 1.0, _pos, "tau > 0"),
        "p0_over_pi": P("float", 0.75),
        "ensemble": P("int", 4096, _pos, "ensemble >= 1"),
        "grid": P("int", 64, lambda g: g >= 8, "grid >= 8"),
        "average": P("int", 50, _pos, "average >= 1"),
        "theta_scheme": P("str", "crank-nicolson", choices=THETA),
    },
    "sawtooth-echo": {
        "K": P("float", required=True),
        "n": P("int", 8, lambda n: 2 <= n <= 14, "2 <= n <= 14"),
        "steps": P("int", 60, _pos, "steps >= 1"),
        "tau": P("float", 1.0, _pos, "tau > 0"),
        "eps": P("float", 1e-3, _nonneg, "eps >= 0"),
        "q0": P("float", 2.5),
        "p0": P("float", -0.5),
        "step_time": P("float", 1.0, _pos, "step_time > 0"),
        "theta_scheme": P("str", "crank-nicolson", choices=THETA),
    },
    "threewave": {
        "s2": P("int", 4, _nonneg, "s2 >= 0"),
        "s3": P("int", 4, _nonneg, "s3 >= 0"),
        "g_re": P("float", 1.0),
        "g_im": P("float", 0.0),
        "dt": P("float", 1e-3, _pos, "dt > 0"),
        "steps": P("int", 1000, lambda s: s >= 4, "steps >= 4"),
        "j0": P("int", 0, _nonneg, "j0 >= 0"),
    },
    "embed-kvn": {
        "gamma": P("float", 1.0),
        "L": P("float", 3.0, _pos, "L > 0"),
        "grid": P("int", 512, lambda g: g >= 8, "grid >= 8"),
        "z0": P("float", 1.0),
        "sigma": P("float", 0.5, _pos, "sigma > 0"),
        "t_final": P("float", 3.0, _pos, "t_final > 0"),
        "dt": P("float", 1e-3, _pos, "dt > 0"),
        "n_out": P("int", 30, _pos, "n_out >= 1"),
        "theta_scheme": P("str", "crank-nicolson", choices=THETA),
    },
    "embed-liouville": {
        "field": P("str", "decay", choices=("decay", "rotation")),
        "gamma": P("float", 1.0),
        "L": P("float", 3.0, _pos, "L > 0"),
        "grid": P("int", 256, lambda g: g >= 8, "grid >= 8"),
        "z0": P("float", 1.0),
        "sigma": P("float", 0.5, _pos, "sigma > 0"),
        "t_final": P("float", 1.0, _pos, "t_final > 0"),
        "dt": P("float", 1e-3, _pos, "dt > 0"),
        "n_out": P("int", 10, _pos, "n_out >= 1"),
        "theta_scheme": P("str", "crank-nicolson", choices=THETA),
    },
    "embed-carleman": {
        "coeffs": P("floats", (0.0, -1.0, 0.1), lambda c: len(c) >= 2 and any(c[1:]),
                    "polynomial of degree >= 1"),
        "z0": P("float", 0.5),
        "order": P("int", 8, _pos, "order >= 1"),
        "dt": P("float", 1e-3, _pos, "dt > 0"),
        "steps": P("int", 5000, _pos, "steps >= 1"),
        "rescale": P("bool", True),
    },
    "rkhs-table": {
        "J": P("int", 20, lambda j: 1 <= j <= 20, "1 <= J <= 20"),
        "convention": P("str", "multiplication-raises",
                        choices=("multiplication-raises", "derivative-raises")),
        "metric": P("str", "raw-moment", choices=("raw-moment", "factorial-normalized")),
    },
}

KINDS = tuple(SCHEMAS)

NOISE_SCHEMA: dict[str, Param] = {
    "relax": P("float", 0.0, _nonneg, "relax >= 0"),
    "dephase": P("float", 0.0, _nonneg, "dephase >= 0"),
    "gate_relax_factor": P("float", 1.0, _nonneg, "gate_relax_factor >= 0"),
    "gate_dephase_factor": P("float", 1.0, _nonneg, "gate_dephase_factor >= 0"),
    "single_qubit_time": P("float", 1.0, _nonneg, "single_qubit_time >= 0"),
    "two_qubit_time": P("float", 1.0, _nonneg, "two_qubit_time >= 0"),
}
NOISE_KINDS = ("ghz", "sawtooth-echo")

_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def parse_value(key: str, raw: str, spec: Param):
    s = str(raw).strip()
    try:
        if spec.type == "int":
            v = int(s, 0)
        elif spec.type == "float":
            v = float(s)
        elif spec.type == "bool":
            if s.lower() in _TRUE:
                v = True
            elif s.lower() in _FALSE:
                v = False
            else:
                raise ValueError(s)
        elif spec.type == "ints":
            v = tuple(int(x, 0) for x in s.replace(",", " ").split())
        elif spec.type == "floats":
            v = tuple(float(x) for x in s.replace(",", " ").split())
        else:
            v = s
    except ValueError:
        raise ConfigError(f"{key}: expected {spec.type}, got {raw!r}") from None
    if spec.choices is not None and v not in spec.choices:
        raise ConfigError(f"{key}: {v!r} not in {list(spec.choices)}")
    if spec.check is not None and not spec.check(v):
        raise ConfigError(f"{key}={raw}: constraint violated: {spec.constraint}")
    return v


@dataclass
class RunConfig:
    kind: str
    params: dict[str, Any]
    noise: dict[str, Any] | None = None
    seed: int = 0
    out: str = "."
    notices: list[str] = field(default_factory=list)

    def echo(self) -> dict:
        out = {"kind": self.kind, "seed": self.seed, "params": _jsonable(self.params)}
        if self.noise is not None:
            out["noise"] = dict(self.noise)
        return out


def _jsonable(d: dict) -> dict:
    return {k: list(v) if isinstance(v, tuple) else v for k, v in d.items()}


def _fill(section: str, raw: dict[str, str], schema: dict[str, Param]) -> dict[str, Any]:
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(unknown)}; "
                          f"allowed: {', '.join(sorted(schema))}")
    out = {}
    for key, spec in schema.items():
        if key in raw:
            out[key] = parse_value(key, raw[key], spec)
        elif spec.required:
            raise ConfigError(f"[{section}] missing required key {key!r}")
        else:
            out[key] = spec.default
    return out


def _parse_seed(raw) -> int:
    try:
        s = int(str(raw).strip(), 0)
    except ValueError:
        raise ConfigError(f"seed: expected an integer, got {raw!r}") from None
    if not 0 <= s < 2 ** 64:
        raise ConfigError(f"seed={raw}: constraint violated: 0 <= seed < 2^64")
    return s


def parse_config(kind: str, path: str | Path | None = None, overrides=(), seed=None,
                 out: str | Path | None = None) -> RunConfig:
    """Build a validated :class:`RunConfig`.

    ``overrides`` are ``key=value`` strings applied after the file;
    ``noise.key=value`` addresses the noise section.  A ``seed`` key may sit
    in ``[run]`` or ``[params]``; the explicit ``seed`` argument wins.
    """
    if kind not in SCHEMAS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}")
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}")
        try:
            cp.read_string(p.read_text(), source=str(p))
        except configparser.Error as exc:
            raise ConfigError(f"malformed config file {p}: {exc}") from None
    bad = sorted(set(cp.sections()) - {"run", "params", "noise"})
    if bad:
        raise ConfigError(f"unknown section(s): {', '.join(bad)}; allowed: run, params, noise")
    run = dict(cp["run"]) if cp.has_section("run") else {}
    params = dict(cp["params"]) if cp.has_section("params") else {}
    noise = dict(cp["noise"]) if cp.has_section("noise") else None
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = (s.strip() for s in item.split("=", 1))
        if key.startswith("noise."):
            noise = {} if noise is None else noise
            noise[key[6:]] = val
        elif key.startswith("run."):
            run[key[4:]] = val
        else:
            params[key] = val
    unknown_run = sorted(set(run) - {"kind", "seed", "out"})
    if unknown_run:
        raise ConfigError(f"[run] unknown key(s): {', '.join(unknown_run)}; allowed: kind, out, seed")
    if "kind" in run and run["kind"] != kind:
        raise ConfigError(f"config declares kind {run['kind']!r} but {kind!r} was requested")
    seed_raw = params.pop("seed", run.get("seed", 0))
    seed_val = _parse_seed(seed if seed is not None else seed_raw)
    values = _fill("params", params, SCHEMAS[kind])
    noise_vals = None
    if noise is not None:
        if kind not in NOISE_KINDS:
            raise ConfigError(f"[noise] is not accepted by kind {kind!r} (only {', '.join(NOISE_KINDS)})")
        noise_vals = _fill("noise", noise, NOISE_SCHEMA)
    cfg = RunConfig(kind, values, noise_vals, seed_val, str(out if out is not None else run.get("out", ".")))
    _cross_checks(cfg)
    return cfg


def _cross_checks(cfg: RunConfig) -> None:
    p = cfg.params
    if cfg.kind == "threewave":
        s2, s3 = p["s2"], p["s3"]
        if s2 < s3:
            cfg.notices.append(f"relabelled waves 2 and 3: (s2, s3) = ({s2}, {s3}) -> ({s3}, {s2})")
            p["s2"], p["s3"] = s3, s2
            p["relabelled"] = True
        else:
            p["relabelled"] = False
        if p["j0"] > min(p["s2"], p["s3"]):
            raise ConfigError(f"j0={p['j0']}: constraint violated: j0 <= min(s2, s3)")
    if cfg.kind == "qae":
        N = 2 ** p["n_qubits"]
        if p["marked"] is not None and any(x >= N for x in p["marked"]):
            raise ConfigError(f"marked: constraint violated: indices < 2^n_qubits = {N}")
        if p["n_marked"] > N:
            raise ConfigError(f"n_marked={p['n_marked']}: constraint violated: n_marked <= 2^n_qubits")
    if cfg.kind == "sawtooth-echo" and cfg.noise is not None and p["n"] > 6:
        raise ConfigError(f"n={p['n']}: constraint violated: n <= 6 with a [noise] section "
                          "(the Lindblad echo is dense and O(T^2))")
    if cfg.kind in ("embed-kvn", "embed-liouville") and p["dt"] > p["t_final"]:
        raise ConfigError("dt: constraint violated: dt <= t_final")
    if cfg.kind == "sawtooth-run" and p["average"] > p["steps"]:
        raise ConfigError("average: constraint violated: average <= steps")
