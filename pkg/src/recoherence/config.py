"""Run configuration: JSON documents, validated before anything runs."""
from __future__ import annotations

import copy
import json
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

SCENARIOS = ("dephasing", "oscillator", "spinboson", "sudden", "oracle-compare")

TOP_KEYS = {"scenario", "description", "bath", "schedule", "sample_dt", "seed", "output", "sweep", "block"}
BATH_KEYS = {"mass", "cutoff", "nodes_per_panel", "k_max", "resolve_time"}
SCHEDULE_KEYS = {"points", "shape", "round_trip", "constant", "constant_J", "T"}
ROUND_TRIP_KEYS = {"eps_max", "t_ramp", "t_hold"}

BLOCK_KEYS = {
    "dephasing": {"method", "integrator", "dt", "rho0", "eps_max", "t_hold", "t_after", "n_samples", "backend"},
    "oscillator": {"Omega", "separation", "width", "n_points", "times", "at", "dump_matrix", "margin"},
    "spinboson": {"Omega", "c_plus", "c_minus"},
    "sudden": {"theta", "eps_t0", "t0", "t_final", "rho0"},
    "oracle-compare": {
        "mode", "omega", "coupling", "eps", "t_ramp", "t_hold", "fock_dim", "n_modes", "k_max",
        "Omega", "J_target", "n_pairs", "max_modes", "max_abs", "dt", "k", "weights", "rho0", "sample_every",
    },
}

DEPHASING_METHODS = ("analytic", "ode", "both", "sudden")
ORACLE_MODES = ("calibrate", "dephasing", "rabi", "overlap")


class ConfigError(ValueError):
    """Invalid configuration; ``where`` names the offending field."""

    def __init__(self, where: str, message: str):
        super().__init__(f"{where}: {message}")
        self.where = where


@dataclass
class RunConfig:
    scenario: str
    bath: dict
    schedule: dict | None
    block: dict
    sample_dt: float | None = None
    seed: int = 0
    output: str | None = None
    sweep: str | None = None
    description: str = ""
    source: str = "<memory>"
    raw: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {"scenario": self.scenario, "bath": self.bath, "block": self.block, "seed": self.seed}
        if self.schedule is not None:
            out["schedule"] = self.schedule
        if self.sample_dt is not None:
            out["sample_dt"] = self.sample_dt
        if self.description:
            out["description"] = self.description
        return out

    def with_value(self, key: str, value) -> "RunConfig":
        """Copy with one (possibly dotted) key replaced; bare keys go to the scenario block."""
        d = copy.deepcopy(self.raw or self.to_dict())
        d.pop("sweep", None)
        parts = key.split(".")
        if len(parts) == 1 and parts[0] not in TOP_KEYS:
            parts = ["block", parts[0]]
        node = d
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
        return parse_config(d, source=f"{self.source}[{key}={value}]")


def _num(where: str, v, positive=False, nonneg=False, allow_none=False):
    if v is None and allow_none:
        return None
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, f"expected a number, got {v!r}")
    v = float(v)
    if not math.isfinite(v):
        raise ConfigError(where, "must be finite")
    if positive and not v > 0:
        raise ConfigError(where, f"must be > 0, got {v}")
    if nonneg and v < 0:
        raise ConfigError(where, f"must be >= 0, got {v}")
    return v


def _check_keys(where: str, d, allowed):
    if not isinstance(d, dict):
        raise ConfigError(where, f"expected an object, got {type(d).__name__}")
    unknown = sorted(set(d) - set(allowed))
    if unknown:
        raise ConfigError(where, f"unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _vec3(where: str, v):
    if not isinstance(v, (list, tuple)) or len(v) != 3:
        raise ConfigError(where, "expected a Bloch vector [r1, r2, r3]")
    r = np.array([_num(f"{where}[{i}]", x) for i, x in enumerate(v)])
    if np.linalg.norm(r) > 1 + 1e-9:
        raise ConfigError(where, "Bloch vector longer than 1")
    return [float(x) for x in r]


def _complex(where: str, v):
    if isinstance(v, (list, tuple)) and len(v) == 2:
        return complex(_num(where, v[0]), _num(where, v[1]))
    return complex(_num(where, v))


def _validate_schedule(sch):
    where = "schedule"
    _check_keys(where, sch, SCHEDULE_KEYS)
    forms = [k for k in ("points", "round_trip", "constant", "constant_J") if k in sch]
    if len(forms) != 1:
        raise ConfigError(where, "give exactly one of points, round_trip, constant, constant_J")
    shape = sch.get("shape", "smooth")
    if shape not in ("smooth", "linear"):
        raise ConfigError(f"{where}.shape", "must be 'smooth' or 'linear'")
    if "points" in sch:
        pts = sch["points"]
        if not isinstance(pts, list) or len(pts) < 2:
            raise ConfigError(f"{where}.points", "need at least two [t, eps] points")
        for i, p in enumerate(pts):
            if not isinstance(p, (list, tuple)) or len(p) != 2:
                raise ConfigError(f"{where}.points[{i}]", "expected [t, eps]")
            _num(f"{where}.points[{i}][0]", p[0], nonneg=True)
            _num(f"{where}.points[{i}][1]", p[1], nonneg=True)
        if pts[0][0] != 0:
            raise ConfigError(f"{where}.points[0]", "schedule must start at t = 0")
    elif "round_trip" in sch:
        rt = sch["round_trip"]
        _check_keys(f"{where}.round_trip", rt, ROUND_TRIP_KEYS)
        for k in ROUND_TRIP_KEYS:
            if k not in rt:
                raise ConfigError(f"{where}.round_trip.{k}", "missing")
        _num(f"{where}.round_trip.eps_max", rt["eps_max"], nonneg=True)
        _num(f"{where}.round_trip.t_ramp", rt["t_ramp"], positive=True)
        _num(f"{where}.round_trip.t_hold", rt["t_hold"], nonneg=True)
    else:
        key = "constant" if "constant" in sch else "constant_J"
        _num(f"{where}.{key}", sch[key], nonneg=True)
        if key == "constant_J" and not 0 < sch[key] <= 1:
            raise ConfigError(f"{where}.constant_J", "J must lie in (0, 1]")
        if "T" not in sch:
            raise ConfigError(f"{where}.T", "missing duration")
        _num(f"{where}.T", sch["T"], positive=True)


def _validate_block(scenario: str, block: dict):
    where = "block"
    _check_keys(where, block, BLOCK_KEYS[scenario])
    for k, v in block.items():
        if k in ("rho0",):
            _vec3(f"{where}.{k}", v)
        elif k in ("c_plus", "c_minus"):
            _complex(f"{where}.{k}", v)
        elif k in ("method", "integrator", "mode", "backend", "at"):
            if not isinstance(v, str):
                raise ConfigError(f"{where}.{k}", "expected a string")
        elif k in ("dump_matrix",):
            if not isinstance(v, bool):
                raise ConfigError(f"{where}.{k}", "expected true/false")
        elif k in ("times", "k", "weights"):
            if not isinstance(v, list) or not v:
                raise ConfigError(f"{where}.{k}", "expected a non-empty list of numbers")
            for i, x in enumerate(v):
                _num(f"{where}.{k}[{i}]", x, nonneg=k != "k")
        elif k in ("theta",):
            _num(f"{where}.{k}", v)
        else:
            _num(f"{where}.{k}", v, nonneg=True, allow_none=True)
    if scenario == "dephasing":
        m = block.get("method", "analytic")
        if m not in DEPHASING_METHODS:
            raise ConfigError(f"{where}.method", f"must be one of {DEPHASING_METHODS}")
        if block.get("integrator", "rk4") not in ("rk4", "etd"):
            raise ConfigError(f"{where}.integrator", "must be 'rk4' or 'etd'")
        if block.get("backend") not in (None, "cython", "python"):
            raise ConfigError(f"{where}.backend", "must be 'cython' or 'python'")
        if m == "sudden":
            for k in ("eps_max", "t_hold", "t_after"):
                if k not in block:
                    raise ConfigError(f"{where}.{k}", "required for method 'sudden'")
    if scenario == "oracle-compare":
        mode = block.get("mode", "calibrate")
        if mode not in ORACLE_MODES:
            raise ConfigError(f"{where}.mode", f"must be one of {ORACLE_MODES}")
    if scenario == "oscillator":
        for k in ("Omega", "separation"):
            if k not in block:
                raise ConfigError(f"{where}.{k}", "required")
        if block.get("at", "recombination") not in ("recombination", "times"):
            raise ConfigError(f"{where}.at", "must be 'recombination' or 'times'")
    if scenario == "spinboson" and "Omega" not in block:
        raise ConfigError(f"{where}.Omega", "required")
    if scenario == "sudden":
        for k in ("theta", "eps_t0", "t_final"):
            if k not in block:
                raise ConfigError(f"{where}.{k}", "required")


def _needs_schedule(scenario: str, block: dict) -> bool:
    if scenario == "sudden":
        return False
    if scenario == "dephasing":
        return block.get("method", "analytic") != "sudden"
    if scenario == "oracle-compare":
        return block.get("mode", "calibrate") == "dephasing"
    return True


def parse_config(d: dict, source: str = "<memory>") -> RunConfig:
    _check_keys("config", d, TOP_KEYS)
    scen = d.get("scenario")
    if scen not in SCENARIOS:
        raise ConfigError("scenario", f"must be one of {SCENARIOS}, got {scen!r}")
    bath = d.get("bath", {})
    _check_keys("bath", bath, BATH_KEYS)
    if scen != "oracle-compare" or bath:
        for k in ("mass", "cutoff"):
            if k not in bath:
                raise ConfigError(f"bath.{k}", "missing")
            _num(f"bath.{k}", bath[k], positive=True)
        for k in ("k_max", "resolve_time"):
            _num(f"bath.{k}", bath.get(k), positive=True, allow_none=True)
        if "nodes_per_panel" in bath and (not isinstance(bath["nodes_per_panel"], int) or bath["nodes_per_panel"] < 2):
            raise ConfigError("bath.nodes_per_panel", "must be an integer >= 2")
    block = d.get("block", {})
    _validate_block(scen, block)
    sch = d.get("schedule")
    if sch is not None:
        _validate_schedule(sch)
    elif _needs_schedule(scen, block):
        raise ConfigError("schedule", "missing")
    sample_dt = _num("sample_dt", d.get("sample_dt"), positive=True, allow_none=True)
    seed = d.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    sweep = d.get("sweep")
    if sweep is not None:
        parse_sweep(sweep)
    out = d.get("output")
    if out is not None and not isinstance(out, str):
        raise ConfigError("output", "expected a path string")
    return RunConfig(scen, dict(bath), sch, dict(block), sample_dt, seed, out, sweep,
                     d.get("description", ""), source, copy.deepcopy(d))


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}", exc.msg) from None
    try:
        return parse_config(d, source=str(path))
    except ConfigError as exc:
        # point at the first line that mentions the offending key
        key = exc.where.split(".")[-1].split("[")[0]
        m = re.search(rf'"{re.escape(key)}"\s*:', text)
        loc = f"{path}:{_line_of(text, m.start())}" if m else str(path)
        raise ConfigError(f"{loc}: {exc.where}", str(exc).split(": ", 1)[1]) from None


# ---------------------------------------------------------------------------
# named configurations shipped with the package

def named_configs() -> dict:
    base = resources.files("recoherence") / "configs"
    out = {}
    for entry in sorted(base.iterdir(), key=lambda p: p.name):
        if entry.name.endswith(".json"):
            out[entry.name[:-5]] = entry
    return out


def resolve_config(ref: str) -> RunConfig:
    """A path to a JSON file, or the name of a shipped configuration."""
    p = Path(ref)
    if p.exists():
        return load_config(p)
    name = ref[:-5] if ref.endswith(".json") else ref
    name = Path(name).stem if "/" in name else name
    table = named_configs()
    if name in table:
        with resources.as_file(table[name]) as fp:
            return load_config(fp)
    raise ConfigError(ref, f"no such file or named config (known: {', '.join(table)})")


# ---------------------------------------------------------------------------
# sweeps

_PI = re.compile(r"^\s*([-+]?\d*\.?\d*(?:e[-+]?\d+)?)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def parse_value(text: str) -> float:
    """A float, or a multiple/fraction of pi such as ``pi``, ``2pi``, ``pi/2``, ``0.5*pi``."""
    t = text.strip().lower()
    m = _PI.match(t)
    if m:
        coef = m.group(1)
        c = 1.0 if coef in ("", "+") else -1.0 if coef == "-" else float(coef)
        div = float(m.group(2)) if m.group(2) else 1.0
        return c * math.pi / div
    try:
        return float(t)
    except ValueError:
        raise ConfigError("sweep", f"cannot parse value {text!r}") from None


def parse_sweep(spec: str):
    """``key=a:b:n`` (inclusive linspace) or ``key=v1,v2,...`` -> (key, values)."""
    if not isinstance(spec, str) or "=" not in spec:
        raise ConfigError("sweep", f"expected key=a:b:n or key=v1,v2,..., got {spec!r}")
    key, rhs = spec.split("=", 1)
    key = key.strip()
    if not re.fullmatch(r"[A-Za-z_][\w.]*", key):
        raise ConfigError("sweep", f"bad key {key!r}")
    if ":" in rhs:
        parts = rhs.split(":")
        if len(parts) != 3:
            raise ConfigError("sweep", "range must be a:b:n")
        a, b = parse_value(parts[0]), parse_value(parts[1])
        try:
            n = int(parts[2])
        except ValueError:
            raise ConfigError("sweep", f"count {parts[2]!r} is not an integer") from None
        if n < 1:
            raise ConfigError("sweep", "count must be >= 1")
        values = list(np.linspace(a, b, n)) if n > 1 else [a]
    else:
        values = [parse_value(v) for v in rhs.split(",") if v.strip()]
        if not values:
            raise ConfigError("sweep", "empty value list")
    return key, [float(v) for v in values]
