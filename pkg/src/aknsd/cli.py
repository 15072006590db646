"""Command-line surface.

Commands: dress, resolvent, flow, evolve, verify, limit, tau.  Shared flags
can also come from environment variables with the AKNSD_ prefix (AKNSD_CONFIG,
AKNSD_OUT, AKNSD_FORMAT, AKNSD_MODE, AKNSD_TOL, AKNSD_SEED, AKNSD_VERBOSE);
explicit flags win over the environment, which wins over the config file.

Exit codes: 0 success / all checks pass, 1 verification failure, 2 input
error (bad config, bad file, bad arguments).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from . import scalars
from .baker import TauExpSum, TimePoint, baker_from_tau, tau_lambda_consistent
from .config import ExperimentConfig, parse_config
from .dynamics import FlowIndex, continuum_scan, gaussian_bump_profile, rk4_evolve
from .errors import AknsdError, ConfigError, ConsistencyError, SchemaError
from .hierarchy import HierarchyState, dressing_residual, flow_field, resolvent_direct
from .matrices import SmallMatrix
from .persist import (
    export_json,
    export_trajectory_csv,
    export_trajectory_json,
    lattice_to_json,
    load_state,
    save_state,
)
from .verify import SUITES, run_verify_suite

ENV_PREFIX = "AKNSD_"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2


def _env(name: str):
    return os.environ.get(ENV_PREFIX + name.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aknsd",
        description="Exact-arithmetic workbench for the discrete AKNS-D hierarchy",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", default=None, help="path to the JSON config")
        p.add_argument("--out", default=None, help="output path")
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--mode", choices=scalars.MODES, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--verbose", action="store_true", default=None)

    p = sub.add_parser("dress", help="solve the dressing and report its residual")
    common(p)
    p.add_argument("--state", default=None,
                   help="verify an existing state document instead of solving")

    p = sub.add_parser("resolvent", help="build a resolvent both ways and compare")
    common(p)
    p.add_argument("--alpha", type=int, default=1)

    p = sub.add_parser("flow", help="evaluate one hierarchy flow field")
    common(p)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--alpha", type=int, default=None)

    p = sub.add_parser("evolve", help="integrate the potential along a flow")
    common(p)

    p = sub.add_parser("verify", help="run a verification suite")
    common(p)
    p.add_argument("--suite", choices=SUITES, default="all")

    p = sub.add_parser("limit", help="run the small-step continuum scan")
    common(p)

    p = sub.add_parser("tau", help="tau-function demo: candidate and consistency")
    common(p)

    return parser


def _load_config(args) -> ExperimentConfig:
    path = args.config or _env("config")
    if not path:
        raise ConfigError("no configuration given (use --config or AKNSD_CONFIG)")
    try:
        with open(path, encoding="utf-8") as fh:
            config = parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    if args.mode or _env("mode"):
        config = dataclasses.replace(config, mode=args.mode or _env("mode"))
    if args.tol is not None or _env("tol"):
        config = dataclasses.replace(
            config, tol=args.tol if args.tol is not None else float(_env("tol")))
    if args.seed is not None or _env("seed"):
        config = dataclasses.replace(
            config, seed=args.seed if args.seed is not None else int(_env("seed")))
    return config


def _out_path(args, config) -> str | None:
    return args.out or _env("out") or config.out


def _fmt(args) -> str:
    return args.format or _env("format") or "json"


def _emit(doc: dict, path: str | None, verbose: bool) -> None:
    if path:
        export_json(doc, path)
        if verbose:
            print(f"wrote {path}")
    else:
        print(json.dumps(doc, indent=1, sort_keys=True))


def _solve(config: ExperimentConfig) -> HierarchyState:
    return HierarchyState.solve(config.data(), config.build_potential(),
                                config.window, config.depth, validate=False)


def cmd_dress(args) -> int:
    config = _load_config(args)
    if args.state:
        state = load_state(args.state)
        tol = 0 if state.mode == scalars.RATIONAL else config.tol
    else:
        state = _solve(config)
        tol = 0 if config.mode == scalars.RATIONAL else config.tol
    residual = dressing_residual(state)
    print(f"dressing residual: {scalars.format_scalar(residual)}")
    out = _out_path(args, config)
    if out and not args.state:
        save_state(state, out)
        if args.verbose:
            print(f"wrote {out}")
    return EXIT_OK if residual <= tol else EXIT_CHECK_FAILED


def cmd_resolvent(args) -> int:
    config = _load_config(args)
    state = _solve(config)
    alpha = args.alpha
    dressed = state.resolvent(alpha)
    direct = resolvent_direct(state.data, state.U, alpha, state.depth)
    worst = 0
    for n in dressed.series.sites():
        for d in range(-state.depth, 1):
            v = (dressed.series.at(n).get(d) - direct.series.at(n).get(d)).max_abs()
            worst = max(worst, v)
    tol = 0 if config.mode == scalars.RATIONAL else config.tol
    doc = {
        "alpha": alpha,
        "depth": state.depth,
        "cross_solver_difference": scalars.format_scalar(worst),
        "pass": bool(worst <= tol),
    }
    _emit(doc, _out_path(args, config), bool(args.verbose))
    return EXIT_OK if worst <= tol else EXIT_CHECK_FAILED


def cmd_flow(args) -> int:
    config = _load_config(args)
    state = _solve(config)
    k, alpha = config.flows[0] if config.flows else (1, 1)
    if args.k is not None:
        k = args.k
    if args.alpha is not None:
        alpha = args.alpha
    tol = 0 if config.mode == scalars.RATIONAL else config.tol
    field = flow_field(state, k, alpha, tol=tol, on_diagonal="keep")
    drift = max(field.at(n).diagonal_part().max_abs() for n in field.sites())
    doc = {
        "k": k,
        "alpha": alpha,
        "diagonal_drift": scalars.format_scalar(drift),
        "field": lattice_to_json(field),
    }
    _emit(doc, _out_path(args, config), bool(args.verbose))
    return EXIT_OK


def cmd_evolve(args) -> int:
    config = _load_config(args)
    data = config.data(scalars.FLOAT)
    u = config.build_potential(scalars.FLOAT)
    state = HierarchyState.solve(data, u, config.window, config.depth,
                                 validate=False)
    flow = FlowIndex(*config.flows[0]) if config.flows else FlowIndex(1, 1)
    traj = rk4_evolve(state, flow, config.h, config.steps)
    out = _out_path(args, config)
    if out:
        if _fmt(args) == "csv":
            export_trajectory_csv(traj, out)
        else:
            export_trajectory_json(traj, out)
        if args.verbose:
            print(f"wrote {out}")
    print(f"evolved {config.steps} steps of h={config.h} along flow "
          f"({flow.k},{flow.alpha}); {len(traj.warnings)} leakage warning(s)")
    return EXIT_OK


def cmd_verify(args) -> int:
    config = _load_config(args)
    report = run_verify_suite(config, args.suite)
    doc = report.to_json()
    out = _out_path(args, config)
    if out:
        export_json(doc, out)
    print(f"suite {args.suite}: {report.verdict} "
          f"({sum(c['pass'] for c in report.checks)}/{len(report.checks)} checks)")
    return EXIT_OK if report.verdict == "pass" else EXIT_CHECK_FAILED


def cmd_limit(args) -> int:
    config = _load_config(args)
    data = config.data(scalars.FLOAT)
    profile = gaussian_bump_profile(config.m, amplitude=0.4, sigma=1.0)
    scan = continuum_scan(data, profile, list(config.eps_list), k=1,
                          x_span=4.0, depth=min(config.depth, 4),
                          halo=min(config.window.halo, 6))
    doc = scan.to_json()
    _emit(doc, _out_path(args, config), bool(args.verbose))
    ok = all(o >= 1.0 for o in scan.cauchy_orders) and \
        all(o >= 1.0 for o in scan.dx_orders)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def cmd_tau(args) -> int:
    config = _load_config(args)
    data = config.data()
    tau = TauExpSum.one(config.mode)
    t0 = TimePoint(config.mode)
    consistent = all(tau_lambda_consistent(tau, data, n) for n in (-2, 0, 3))
    worst = scalars.zero(config.mode)
    for n in (config.window.n_min, 0, config.window.n_max):
        w = baker_from_tau(tau, {}, n, t0, data, config.depth)
        for d in range(-config.depth, 1):
            target = SmallMatrix.identity(config.m, config.mode) if d == 0 \
                else SmallMatrix.zero(config.m, config.mode)
            worst = max(worst, (w.get(d) - target).max_abs())
    doc = {
        "vacuum_candidate_error": scalars.format_scalar(worst),
        "lambda_consistency": bool(consistent),
    }
    _emit(doc, _out_path(args, config), bool(args.verbose))
    return EXIT_OK if worst == 0 and consistent else EXIT_CHECK_FAILED


_COMMANDS = {
    "dress": cmd_dress,
    "resolvent": cmd_resolvent,
    "flow": cmd_flow,
    "evolve": cmd_evolve,
    "verify": cmd_verify,
    "limit": cmd_limit,
    "tau": cmd_tau,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, SchemaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except ConsistencyError as exc:
        print(f"verification failure: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except AknsdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
