"""Scenario configuration, experiment presets and artifact writing.

Config files are flat ``key = value`` text::

    # comments start with '#'
    graph = builtin:zachary        # or a path to an edge list
    mode = rh-fixed
    t_f = 10
    tau = 0.6
    eps = 1.2                      # scalar, comma vector, or 'auto'
    r = 1.0
    x0 = uniform                   # 'uniform', comma vector, or file:PATH

Vector-valued keys (``r``, ``b``, ``omega``, ``eps``) accept a scalar,
which is broadcast to every agent, or exactly ``n`` comma-separated
values.
"""

from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptyNeighborhoodError, HKGameError, NoFeasibleEpsError
from .graph import FilterMode, SocialGraph, confidence_filter, load_edge_list, zachary
from .openloop import GameParams, Trajectory, build_setup, sample_trajectory, uniform_opinions
from .receding import GainMode, HorizonConfig, rh_run
from .verify import CLUSTER_TOL, CONSENSUS_TOL, classify_outcome, evaluate_cost, format_report

__all__ = [
    "MODES",
    "ScenarioConfig",
    "parse_config",
    "load_config",
    "resolve_graph",
    "resolve_x0",
    "min_connectivity_eps",
    "PRESETS",
    "list_presets",
    "preset_config",
    "ScenarioResult",
    "simulate_scenario",
    "run_scenario",
    "write_csv",
    "read_csv",
]

MODES = (
    "baseline",
    "openloop-nonstubborn",
    "openloop-stubborn",
    "rh-fixed",
    "rh-complete",
    "rh-second",
)

_RH_FILTER = {
    "baseline": FilterMode.FIXED,
    "rh-fixed": FilterMode.FIXED,
    "rh-complete": FilterMode.COMPLETE,
    "rh-second": FilterMode.SECOND,
}

_FLOAT_KEYS = ("t_f", "tau", "sigma", "dt", "total_time", "consensus_tol", "cluster_tol")
_VECTOR_KEYS = ("r", "b", "omega", "eps")


@dataclass
class ScenarioConfig:
    graph: str = "builtin:zachary"
    mode: str = "openloop-nonstubborn"
    t_f: float = 10.0
    tau: float = 0.0
    sigma: float = 1.0
    dt: float = 0.01
    total_time: float | None = None
    r: object = 1.0
    b: object = 1.0
    omega: object = 0.0
    eps: object = "auto"
    x0: str = "uniform"
    out: str | None = None
    seed: int = 0
    eps_autogrow: bool = False
    gain: str = "tracking"
    consensus_tol: float = CONSENSUS_TOL
    cluster_tol: float = CLUSTER_TOL
    base_dir: str = field(default=".", repr=False)

    def replace(self, **changes):
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    def validate(self):
        if self.mode not in MODES:
            raise ConfigError("mode", f"expected one of {', '.join(MODES)}, got {self.mode!r}")
        for key in ("t_f", "dt", "sigma", "consensus_tol", "cluster_tol"):
            if not getattr(self, key) > 0:
                raise ConfigError(key, "must be positive")
        if not 0 <= self.tau < self.t_f:
            raise ConfigError("tau", "must satisfy 0 <= tau < t_f")
        if self.dt > self.t_f:
            raise ConfigError("dt", "must not exceed t_f")
        if self.mode.startswith("rh") or self.mode == "baseline":
            if not self.tau < self.sigma <= self.t_f:
                raise ConfigError("sigma", "must satisfy tau < sigma <= t_f")
            if self.run_time < self.sigma:
                raise ConfigError("total_time", "must be at least sigma")
        try:
            GainMode(self.gain)
        except ValueError:
            raise ConfigError("gain", f"expected 'tracking' or 'frozen', got {self.gain!r}") from None

    @property
    def run_time(self):
        return self.t_f if self.total_time is None else self.total_time


def _parse_bool(key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(key, f"expected a boolean, got {text!r}")


def _parse_float(key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(key, f"expected a number, got {text!r}") from None


def parse_vector(key, text):
    """Scalar or comma-separated vector (``'auto'`` kept for ``eps``)."""
    if isinstance(text, (int, float, np.ndarray, list, tuple)):
        return text
    text = text.strip()
    if key == "eps" and text.lower() == "auto":
        return "auto"
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ConfigError(key, "empty value")
    vals = [_parse_float(key, p) for p in parts]
    return vals[0] if len(parts) == 1 and "," not in text else np.array(vals)


def parse_config(text: str, base_dir: str = ".") -> ScenarioConfig:
    cfg = ScenarioConfig(base_dir=base_dir)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)} - {"base_dir"}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in known:
            raise ConfigError(key, "unknown configuration key")
        setattr(cfg, key, coerce(key, value))
    cfg.validate()
    return cfg


def coerce(key, value):
    """Convert a raw string to the typed value of config field ``key``."""
    if not isinstance(value, str):
        return value
    if key in _FLOAT_KEYS:
        return _parse_float(key, value)
    if key in _VECTOR_KEYS:
        return parse_vector(key, value)
    if key == "seed":
        try:
            return int(value)
        except ValueError:
            raise ConfigError(key, f"expected an integer, got {value!r}") from None
    if key == "eps_autogrow":
        return _parse_bool(key, value)
    return value


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as err:
        raise ConfigError("config", f"cannot read {path}: {err.strerror}") from None
    return parse_config(text, base_dir=str(path.parent))


def _resolve_path(cfg, name):
    return name if os.path.isabs(name) else os.path.join(cfg.base_dir, name)


def resolve_graph(cfg: ScenarioConfig) -> SocialGraph:
    if cfg.graph == "builtin:zachary":
        return zachary()
    path = _resolve_path(cfg, cfg.graph)
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError("graph", f"cannot read {path}: {err.strerror}") from None
    try:
        return load_edge_list(text)
    except (HKGameError, ValueError) as err:
        raise ConfigError("graph", str(err)) from None


def _broadcast(key, value, n):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    if arr.shape != (n,):
        raise ConfigError(key, f"expected a scalar or {n} values, got {arr.size}")
    return arr


def resolve_x0(cfg: ScenarioConfig, n: int) -> np.ndarray:
    spec = cfg.x0.strip() if isinstance(cfg.x0, str) else cfg.x0
    if isinstance(spec, str) and spec.lower() == "uniform":
        return uniform_opinions(n)
    if isinstance(spec, str) and spec.startswith("file:"):
        path = _resolve_path(cfg, spec[5:])
        try:
            text = Path(path).read_text()
        except OSError as err:
            raise ConfigError("x0", f"cannot read {path}: {err.strerror}") from None
        spec = ",".join(text.replace("\n", ",").split())
    vec = parse_vector("x0", spec)
    return _broadcast("x0", vec, n)


def min_connectivity_eps(g: SocialGraph, x0, mode="fixed") -> float:
    """Smallest bound on the 0.01 grid in ``(0, 2]`` leaving no agent isolated at ``x0``."""
    x0 = np.asarray(x0, dtype=float)
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    for k in range(1, 201):
        eps = k / 100
        try:
            confidence_filter(g, x0, eps, mode)
        except EmptyNeighborhoodError:
            continue
        return eps
    raise NoFeasibleEpsError(f"no confidence bound up to 2 keeps every agent connected ({FilterMode.parse(mode).value})")


# ---------------------------------------------------------------- presets

_DEFAULTED = {
    "r": "defaulted=1.0 (not reported in paper)",
    "sigma": "defaulted (not reported in paper)",
    "dt": "defaulted=0.01 (not reported in paper)",
}


@dataclass(frozen=True)
class Preset:
    name: str
    values: dict
    reported: tuple  # keys whose values come from the source experiments
    note: str = ""

    def config(self) -> ScenarioConfig:
        cfg = ScenarioConfig()
        for k, v in self.values.items():
            setattr(cfg, k, v)
        cfg.validate()
        return cfg

    def describe(self) -> str:
        mode = self.values["mode"]
        head = f"{self.name}: {mode}"
        key = {"baseline": "eps", "openloop-stubborn": "omega"}.get(mode)
        if key:
            head += f" {key}={self.values[key]:g}"
        else:
            head += f" tau={self.values.get('tau', 0.0):g}"
        parts = []
        for k in ("t_f", "tau", "sigma", "dt", "total_time", "eps", "omega", "r", "b"):
            if k not in self.values:
                continue
            v = self.values[k]
            vs = v if isinstance(v, str) else f"{v:g}"
            if k in self.reported:
                tag = "reported"
            elif k in _DEFAULTED:
                tag = _DEFAULTED[k]
            else:
                tag = "defaulted (not reported in paper)"
            parts.append(f"{k}={vs} [{tag}]")
        text = head + " | " + ", ".join(parts)
        return text + (f" | {self.note}" if self.note else "")


def _p(name, reported, note="", **values):
    base = dict(graph="builtin:zachary", x0="uniform", t_f=10.0, r=1.0, b=1.0, dt=0.01)
    base.update(values)
    return Preset(name, base, tuple(reported) + ("graph", "x0", "t_f", "b"), note)


RH_SIGMA = 1.0

PRESETS = {
    p.name: p
    for p in [
        _p("fig2a", ("eps",), mode="baseline", eps=1.2, tau=0.0, sigma=RH_SIGMA),
        _p("fig2b", ("eps",), mode="baseline", eps=1.5, tau=0.0, sigma=RH_SIGMA),
        _p("fig2c", ("eps",), mode="baseline", eps=2.0, tau=0.0, sigma=RH_SIGMA),
        _p("fig3a", (), mode="openloop-stubborn", omega=0.3, tau=0.0, note="omega per panel not reported; 0.3 declared default"),
        _p("fig3b", (), mode="openloop-stubborn", omega=0.7, tau=0.0, note="omega per panel not reported; 0.7 declared default"),
        _p("fig3c", ("omega",), mode="openloop-stubborn", omega=1.0, tau=0.0),
        _p("fig4a", ("tau", "eps"), mode="rh-fixed", tau=0.0, eps="auto", sigma=RH_SIGMA),
        _p("fig4b", ("tau",), mode="rh-fixed", tau=0.4, eps="auto", sigma=RH_SIGMA),
        _p("fig4c", ("tau",), mode="rh-fixed", tau=0.6, eps="auto", sigma=RH_SIGMA),
        _p("fig5a", ("tau", "eps"), mode="rh-complete", tau=0.0, eps="auto", sigma=RH_SIGMA),
        _p("fig5b", (), mode="rh-complete", tau=0.4, eps="auto", sigma=RH_SIGMA, note="delay value not reported"),
        _p("fig5c", (), mode="rh-complete", tau=0.6, eps="auto", sigma=RH_SIGMA, note="delay value not reported"),
        _p("fig6a", ("tau", "eps"), mode="rh-second", tau=0.0, eps="auto", sigma=RH_SIGMA),
        _p("fig6b", (), mode="rh-second", tau=0.4, eps="auto", sigma=RH_SIGMA, note="delay value not reported"),
        _p("fig6c", (), mode="rh-second", tau=0.6, eps="auto", sigma=RH_SIGMA, note="delay value not reported"),
    ]
}


def list_presets() -> list[str]:
    return [PRESETS[k].describe() for k in sorted(PRESETS)]


def preset_config(name: str) -> ScenarioConfig:
    try:
        return PRESETS[name].config()
    except KeyError:
        raise ConfigError("preset", f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None


# ---------------------------------------------------------------- running

@dataclass
class ScenarioResult:
    config: ScenarioConfig
    graph: SocialGraph
    params: GameParams
    trajectory: Trajectory
    eps: np.ndarray | None
    outcome: object
    costs: list


def _game_params(cfg, g, x0):
    n = g.n
    try:
        return GameParams.create(
            n,
            cfg.t_f,
            x0,
            tau=cfg.tau,
            r=_broadcast("r", cfg.r, n),
            b=_broadcast("b", cfg.b, n),
            omega=_broadcast("omega", cfg.omega, n),
        )
    except ConfigError:
        raise
    except ValueError as err:
        raise ConfigError("params", str(err)) from None


def resolve_eps(cfg, g, x0):
    if isinstance(cfg.eps, str):
        if cfg.eps.lower() != "auto":
            raise ConfigError("eps", f"expected a number, vector or 'auto', got {cfg.eps!r}")
        mode = _RH_FILTER.get(cfg.mode, FilterMode.FIXED)
        return np.full(g.n, min_connectivity_eps(g, x0, mode))
    eps = _broadcast("eps", cfg.eps, g.n)
    if np.any(eps <= 0):
        raise ConfigError("eps", "confidence bounds must be positive")
    return eps


def simulate_scenario(cfg: ScenarioConfig) -> ScenarioResult:
    cfg.validate()
    g = resolve_graph(cfg)
    x0 = resolve_x0(cfg, g.n)
    p = _game_params(cfg, g, x0)
    eps = None
    if cfg.mode.startswith("openloop"):
        stubborn = cfg.mode == "openloop-stubborn"
        traj = sample_trajectory(build_setup(g, p, stubborn), p, cfg.dt)
    else:
        eps = resolve_eps(cfg, g, x0)
        h = HorizonConfig(
            sigma=cfg.sigma,
            mode=_RH_FILTER[cfg.mode],
            total_time=cfg.run_time,
            dt=cfg.dt,
            eps=eps,
            baseline=cfg.mode == "baseline",
            gain=cfg.gain,
            eps_autogrow=cfg.eps_autogrow,
        )
        traj = rh_run(g, x0, p, h)
    stubborn = cfg.mode == "openloop-stubborn"
    cost_p = p.replace(t_f=traj.times[-1], tau=min(p.tau, traj.times[-1] / 2)) if not cfg.mode.startswith("openloop") else p
    costs = [evaluate_cost(traj, i, cost_p, g, stubborn) for i in range(g.n)]
    outcome = classify_outcome(traj.final, cfg.consensus_tol, cfg.cluster_tol)
    return ScenarioResult(cfg, g, p, traj, eps, outcome, costs)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def write_csv(path, times, values, prefix):
    n = values.shape[1]
    header = ",".join(["t"] + [f"{prefix}_{i}" for i in range(n)])
    lines = [header]
    for t, row in zip(times, values):
        lines.append(",".join([_fmt(t)] + [_fmt(v) for v in row]))
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("ascii"))


def read_csv(path):
    """Return ``(header, times, values)`` of a trajectory/control CSV."""
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    return header, data[:, 0], data[:, 1:]


def summary_entries(res: ScenarioResult):
    cfg = res.config
    o = res.outcome
    entries = [
        ("mode", cfg.mode),
        ("n", res.graph.n),
        ("t_f", cfg.t_f),
        ("tau", cfg.tau),
        ("duration", float(res.trajectory.times[-1])),
        ("outcome", str(o)),
        ("clusters", o.k if o.kind.value == "clustered" else (1 if o.kind.value == "consensus" else 0)),
        ("cluster_centers", ",".join(_fmt(c) for c in o.cluster_centers)),
        ("final_spread", o.max_spread),
        ("consensus_tol", cfg.consensus_tol),
        ("cluster_tol", cfg.cluster_tol),
    ]
    if res.eps is not None:
        entries.append(("eps", ",".join(_fmt(e) for e in res.eps)))
    for c in res.costs:
        entries.append((f"cost_{c.agent}", c.total))
    return entries


def run_scenario(cfg: ScenarioConfig, out_dir=None) -> ScenarioResult:
    """Simulate and write ``trajectory.csv``, ``controls.csv``, ``summary.txt``."""
    res = simulate_scenario(cfg)
    out_dir = out_dir or cfg.out
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        tr = res.trajectory
        write_csv(out / "trajectory.csv", tr.times, tr.opinions, "x")
        write_csv(out / "controls.csv", tr.times, tr.controls, "u")
        (out / "summary.txt").write_bytes(format_report(summary_entries(res)).encode("ascii"))
    return res
