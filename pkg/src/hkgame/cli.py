"""Command-line front end.

Exit codes
----------
0  success
1  any other package error (e.g. no feasible confidence bound)
2  configuration error
3  solver singularity
4  empty confidence neighbourhood
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ConfigError, EmptyNeighborhoodError, HKGameError, SingularMatrixError
from .graph import FilterMode
from .openloop import build_setup, sample_trajectory
from .scenario import (
    MODES,
    ScenarioConfig,
    coerce,
    list_presets,
    load_config,
    min_connectivity_eps,
    preset_config,
    resolve_graph,
    resolve_x0,
    run_scenario,
    summary_entries,
    _game_params,
)
from .verify import deviation_test, equilibrium_control_fn, format_report, simulate_forward

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_SINGULAR = 3
EXIT_EMPTY = 4


def _overrides(args):
    raw = {
        "mode": args.mode,
        "t_f": args.tf,
        "tau": args.tau,
        "sigma": args.sigma,
        "eps": args.eps,
        "r": args.r,
        "omega": args.omega,
        "out": args.out,
        "seed": args.seed,
        "total_time": args.total_time,
        "gain": args.gain,
    }
    changes = {k: coerce(k, v) for k, v in raw.items() if v is not None}
    if args.eps_autogrow:
        changes["eps_autogrow"] = True
    return changes


def _configure(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig()
    cfg = cfg.replace(**_overrides(args))
    cfg.validate()
    return cfg


def _emit_run(cfg, out=None):
    res = run_scenario(cfg, out)
    sys.stdout.write(format_report(summary_entries(res)))
    return EXIT_OK


def cmd_run(args):
    return _emit_run(_configure(args))


def cmd_preset(args):
    cfg = preset_config(args.name)
    return _emit_run(cfg.replace(out=args.out))


def cmd_presets(args):
    for line in list_presets():
        print(line)
    return EXIT_OK


def cmd_min_eps(args):
    cfg = ScenarioConfig(graph=args.graph, x0=args.x0)
    g = resolve_graph(cfg)
    try:
        mode = FilterMode.parse(args.mode)
    except ValueError as err:
        raise ConfigError("mode", str(err)) from None
    eps = min_connectivity_eps(g, resolve_x0(cfg, g.n), mode)
    print(f"eps={eps:.2f}")
    return EXIT_OK


def cmd_verify(args):
    """Oracle checks on the open-loop game underlying the scenario."""
    cfg = _configure(args)
    g = resolve_graph(cfg)
    p = _game_params(cfg, g, resolve_x0(cfg, g.n))
    stubborn = cfg.mode == "openloop-stubborn"
    s = build_setup(g, p, stubborn)
    closed = sample_trajectory(s, p, args.dt)
    u_star = equilibrium_control_fn(g, p, stubborn)
    sim = simulate_forward(g, p, u_star, args.dt)
    gap = float(np.max(np.abs(closed.opinions[-1] - sim.opinions[-1])))
    entries = [
        ("mode", cfg.mode),
        ("stubborn", str(stubborn).lower()),
        ("n", g.n),
        ("forward_sim_max_gap", gap),
        ("forward_sim_pass", gap <= args.sim_tol),
    ]
    ok = gap <= args.sim_tol
    agents = range(g.n) if args.agents is None else args.agents
    for i in agents:
        rep = deviation_test(g, p, i, args.perturbations, cfg.seed, stubborn, dt=args.dt, u_star=u_star)
        entries += [(f"deviation_{i}_min_margin", rep.min_margin), (f"deviation_{i}_pass", rep.passed)]
        ok &= rep.passed
    entries.append(("verified", ok))
    sys.stdout.write(format_report(entries))
    return EXIT_OK if ok else EXIT_ERROR


def _add_scenario_flags(sp):
    sp.add_argument("--config", help="key=value scenario file")
    sp.add_argument("--mode", choices=MODES)
    sp.add_argument("--tf")
    sp.add_argument("--tau")
    sp.add_argument("--sigma")
    sp.add_argument("--total-time")
    sp.add_argument("--eps", help="scalar, comma vector or 'auto'")
    sp.add_argument("--r", help="scalar or comma vector")
    sp.add_argument("--omega", help="scalar or comma vector")
    sp.add_argument("--gain", choices=("tracking", "frozen"))
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--seed")
    sp.add_argument("--eps-autogrow", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hkgame", description="Open-loop and receding-horizon opinion games.")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("run", help="run a scenario and write CSV artifacts")
    _add_scenario_flags(sp)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("preset", help="run a named preset")
    sp.add_argument("name")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_preset)

    sp = sub.add_parser("presets", help="list presets and their parameter sources")
    sp.set_defaults(func=cmd_presets)

    sp = sub.add_parser("min-eps", help="smallest confidence bound keeping every agent connected")
    sp.add_argument("--graph", default="builtin:zachary")
    sp.add_argument("--mode", default="fixed")
    sp.add_argument("--x0", default="uniform")
    sp.set_defaults(func=cmd_min_eps)

    sp = sub.add_parser("verify", help="oracle checks on the scenario's open-loop game")
    _add_scenario_flags(sp)
    sp.add_argument("--dt", type=float, default=1e-2)
    sp.add_argument("--sim-tol", type=float, default=1e-6)
    sp.add_argument("--perturbations", type=int, default=5)
    sp.add_argument("--agents", type=int, nargs="*")
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except SingularMatrixError as err:
        print(f"singular system: {err}", file=sys.stderr)
        return EXIT_SINGULAR
    except EmptyNeighborhoodError as err:
        print(f"empty neighbourhood: {err}", file=sys.stderr)
        return EXIT_EMPTY
    except HKGameError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
