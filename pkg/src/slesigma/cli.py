"""Command-line entry point: ``slesigma simulate|track|density|phases|scan|verify``.

Exit codes: 0 success, 1 validation or usage error, 2 a verify check failed.
A flat ``key = value`` file given by ``--config`` supplies defaults; flags
on the command line override it.  Every output file starts with a comment
header holding the resolved config, which :func:`slesigma.io.read_header`
reads back.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import (PROBE_CELL, PROBE_DILATION, disconnection_survey, drift_logderiv,
                          drift_logmod, duality_test, stationarity_test)
from .model import SigmaError, path_to_binary, path_to_csv, sample_driving_path, validate_sigma, zero_path
from .phases import classify, phase_scan
from .point_tracker import polar_evolve
from .quadrature import QuadratureError
from .slit_engine import (DEFAULT_EPSILON, DEFAULT_HORIZON, DEFAULT_N, OnSlitError, left_hull_cloud,
                          right_hull_cloud)
from .stationary import DEFAULT_GRID, DensityError, OracleError, stationary_density

EXIT_OK, EXIT_INVALID, EXIT_VERIFY = 0, 1, 2

# per-check defaults for ``verify`` when a flag is left unset
VERIFY_DEFAULTS = {
    "drift": {"a": 6.0, "b": 1.0, "c": 0.0, "N": 2000, "t_end": 3.0, "h": 1e-3},
    "stationarity": {"a": 2.0, "b": 1.0, "c": 0.5, "N": 5000, "h": 1e-3},
    "duality": {"a": 1.0, "b": 4.0, "c": 0.0, "n": 2000},
    "disconnect": {"a": 1.0, "b": 1.0, "c": 0.0, "n": DEFAULT_N},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _range(text: str):
    try:
        lo, hi = (float(s) for s in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected LO:HI, got {text!r}") from None
    return lo, hi


def _floats(text: str):
    try:
        return [float(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _sigma_args(p, default=0.0):
    p.add_argument("--a", type=float, default=default)
    p.add_argument("--b", type=float, default=default)
    p.add_argument("--c", type=float, default=0.0 if default is not None else None)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat key = value file; flags override it")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--workers", type=int, default=1)

    parser = _Parser(prog="slesigma", description="Loewner evolution driven by complex Brownian motion")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", parents=[common], help="hull point cloud to CSV (and SVG)")
    _sigma_args(p)
    p.add_argument("--n", type=int, default=DEFAULT_N)
    p.add_argument("--horizon", type=float, default=DEFAULT_HORIZON)
    p.add_argument("--eps", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--side", choices=("left", "right"), default="left")
    p.add_argument("--zero", action="store_true", help="use the zero driving path")
    p.add_argument("--out", help="cloud CSV (re, im, t_added, probe)")
    p.add_argument("--svg", help="optional scatter plot")
    p.add_argument("--path-csv", help="also write the driving path as CSV")
    p.add_argument("--path-bin", help="also write the driving path as binary f64 pairs")

    p = sub.add_parser("track", parents=[common], help="polar SDE trajectories in sigma-time")
    _sigma_args(p)
    p.add_argument("--N", type=int, default=1)
    p.add_argument("--theta0", type=float, default=None, help="default: sampled from p")
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--h", type=float, default=1e-3)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--out", help="trajectory CSV of the first path")

    p = sub.add_parser("density", parents=[common], help="stationary angular density to CSV")
    _sigma_args(p)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--out", help="density CSV (u, p); stdout when omitted")

    p = sub.add_parser("phases", parents=[common], help="phase integrals and label as JSON")
    _sigma_args(p)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--out", help="JSON file; stdout always")

    p = sub.add_parser("scan", parents=[common], help="classify an (a, b) grid")
    p.add_argument("--a-range", type=_range, default=(0.0, 12.0))
    p.add_argument("--b-range", type=_range, default=(0.0, 8.0))
    p.add_argument("--c", type=float, default=0.0)
    p.add_argument("--res", type=float, default=0.25)
    p.add_argument("--grid", type=int, default=DEFAULT_GRID)
    p.add_argument("--out", default="scan.csv")
    p.add_argument("--boundary-out", default=None, help="default: <out stem>_boundary.csv")

    p = sub.add_parser("verify", parents=[common], help="Monte-Carlo checks with pass/fail")
    p.add_argument("check", choices=("drift", "stationarity", "duality", "disconnect"))
    _sigma_args(p, default=None)
    p.add_argument("--N", type=int, default=None, help="paths (drift, stationarity)")
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--h", type=float, default=None)
    p.add_argument("--checkpoints", type=_floats, default=[1.0, 2.0])
    p.add_argument("--n", type=int, default=None, help="steps per hull")
    p.add_argument("--eps", type=float, default=DEFAULT_EPSILON)
    p.add_argument("--horizon", type=float, default=DEFAULT_HORIZON)
    p.add_argument("--n-hulls", type=int, default=200)
    p.add_argument("--statistic", choices=("max_modulus", "real_extent", "imag_extent"),
                   default="max_modulus")
    p.add_argument("--seeds", type=int, default=20, help="hulls for the disconnect probe")
    p.add_argument("--cell", type=float, default=PROBE_CELL)
    p.add_argument("--dilation", type=float, default=PROBE_DILATION)
    p.add_argument("--out", help="JSON report file")
    return parser


def _subparser(parser, name):
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[name]
    raise KeyError(name)


def _convert(action, raw: str):
    if isinstance(action, argparse._StoreTrueAction):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise UsageError(f"config: {action.dest} expects a boolean, got {raw!r}")
    if raw.lower() in ("none", "null", ""):
        return None
    try:
        value = action.type(raw) if action.type else raw
    except (argparse.ArgumentTypeError, ValueError) as exc:
        raise UsageError(f"config: bad value for {action.dest}: {exc}") from None
    if action.choices is not None and value not in action.choices:
        raise UsageError(f"config: {action.dest} must be one of {sorted(action.choices)}")
    return value


def parse(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        sp = _subparser(parser, args.command)
        actions = {a.dest: a for a in sp._actions if a.dest not in ("help", "config")}
        values = {}
        for key, raw in io.read_config_file(args.config).items():
            if key not in actions or not actions[key].option_strings:
                raise UsageError(f"config: unknown key {key!r} for {args.command}")
            values[key] = _convert(actions[key], raw)
        sp.set_defaults(**values)
        args = parser.parse_args(argv)
    return args


def _config(args) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k != "config"}
    return cfg


def _sigma(args):
    return validate_sigma(args.a, args.b, args.c)


def _positive(**kw):
    for name, value in kw.items():
        if value is None or not value > 0 or (isinstance(value, float) and not math.isfinite(value)):
            raise ValueError(f"{name} must be positive, got {value}")


def cmd_simulate(args):
    if not args.out:
        raise UsageError("simulate needs --out")
    _positive(n=args.n, horizon=args.horizon, eps=args.eps)
    sigma = _sigma(args)
    if args.zero:
        path = zero_path(args.n, args.horizon)
    else:
        path = sample_driving_path(sigma, args.n, args.horizon, args.seed)
    make = right_hull_cloud if args.side == "right" else left_hull_cloud
    cloud = make(path, args.eps)
    cfg = _config(args)
    cfg.update(n_points=len(cloud), n_dropped=cloud.n_dropped, n_on_slit=cloud.n_on_slit)
    header = io.make_header("simulate", cfg)
    io.write_cloud_csv(cloud, args.out, header)
    if args.path_csv:
        path_to_csv(path, args.path_csv, io.make_header("simulate", _config(args)))
    if args.path_bin:
        path_to_binary(path, args.path_bin)
    if args.svg:
        try:
            io.write_cloud_svg([cloud], args.svg, f"a={args.a} b={args.b} c={args.c} seed={args.seed}")
        except Exception as exc:  # figures are best-effort
            print(f"slesigma: warning: SVG not written: {exc}", file=sys.stderr)
    print(f"{len(cloud)} points -> {args.out}")
    return EXIT_OK


def cmd_track(args):
    _positive(N=args.N, t_end=args.t_end, h=args.h)
    sigma = _sigma(args)
    if args.theta0 is None:
        dens = stationary_density(sigma, args.grid)
        theta0 = dens.sample(args.N, np.random.default_rng([args.seed, 2**31]))
    else:
        theta0 = np.full(args.N, args.theta0)
    traj = polar_evolve(sigma, theta0, args.t_end, args.h, args.seed)
    lm = np.asarray(traj.logmod).reshape(traj.times.size, -1)[-1]
    ld = np.asarray(traj.logderiv).reshape(traj.times.size, -1)[-1]
    if args.out:
        traj.to_csv(args.out, 0, io.make_header("track", _config(args)))
    summary = {"mean_logmod_rate": float(np.mean(lm) / args.t_end),
               "mean_logderiv_minus_logmod_rate": float(np.mean(ld - lm) / args.t_end),
               "N": args.N, "seed": args.seed, "h": args.h, "t_end": args.t_end}
    print(io.write_json(summary, header=_config(args)))
    return EXIT_OK


def cmd_density(args):
    sigma = _sigma(args)
    dens = stationary_density(sigma, args.grid)
    cfg = _config(args)
    cfg.update(method=dens.method, r_star=dens.r_star, normalizer=dens.normalizer)
    header = io.make_header("density", cfg)
    if args.out:
        dens.to_csv(args.out, header)
    else:
        sys.stdout.write(header + "u,p\n")
        for u, p in zip(dens.grid, dens.values):
            sys.stdout.write(f"{float(u)!r},{float(p)!r}\n")
    return EXIT_OK


def cmd_phases(args):
    rep = classify(_sigma(args), args.tol, args.grid)
    print(io.write_json(rep.to_dict(), args.out, header=_config(args)))
    return EXIT_OK


def cmd_scan(args):
    _positive(res=args.res)
    scan = phase_scan(args.a_range, args.b_range, args.c, args.res, args.grid,
                      workers=args.workers)
    bout = args.boundary_out or str(Path(args.out).with_name(Path(args.out).stem + "_boundary.csv"))
    cfg = _config(args)
    cfg["boundary_out"] = bout
    header = io.make_header("scan", cfg)
    io.write_scan_csv(scan, args.out, header)
    io.write_boundary_csv(scan, bout, header)
    print(f"{scan.labels.size} cells -> {args.out}; boundaries -> {bout}")
    return EXIT_OK


def cmd_verify(args):
    for key, value in VERIFY_DEFAULTS[args.check].items():
        if getattr(args, key, None) is None:
            setattr(args, key, value)
    for key in ("a", "b", "c"):
        if getattr(args, key) is None:
            setattr(args, key, 0.0)
    sigma = _sigma(args)
    if args.check == "drift":
        _positive(N=args.N, t_end=args.t_end, h=args.h)
        r1 = drift_logmod(sigma, args.N, args.t_end, args.h, args.seed, args.workers)
        r2 = drift_logderiv(sigma, args.N, args.t_end, args.h, args.seed, args.workers)
        report = {"logmod": r1.to_dict(), "logderiv": r2.to_dict(),
                  "passed": r1.passed() and r2.passed()}
    elif args.check == "stationarity":
        _positive(N=args.N, h=args.h)
        r = stationarity_test(sigma, args.N, tuple(args.checkpoints), args.h, args.seed,
                              workers=args.workers)
        report = r.to_dict()
    elif args.check == "duality":
        _positive(n=args.n, n_hulls=args.n_hulls)
        r = duality_test(sigma, args.n_hulls, args.n, args.eps, args.statistic, args.seed,
                         args.horizon, workers=args.workers)
        report = r.to_dict()
    else:
        _positive(n=args.n, seeds=args.seeds)
        seeds = range(args.seed, args.seed + args.seeds)
        r = disconnection_survey(sigma, seeds, args.n, args.eps, args.horizon, args.cell,
                                 args.dilation, workers=args.workers)
        report = r.to_dict()
    print(io.write_json(report, args.out, header=_config(args)))
    return EXIT_OK if report["passed"] else EXIT_VERIFY


COMMANDS = {"simulate": cmd_simulate, "track": cmd_track, "density": cmd_density,
            "phases": cmd_phases, "scan": cmd_scan, "verify": cmd_verify}


def main(argv=None) -> int:
    try:
        args = parse(sys.argv[1:] if argv is None else list(argv))
        if args.workers < 1:
            raise ValueError("workers must be at least 1")
        return COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_INVALID
    except (UsageError, SigmaError, DensityError, OnSlitError, QuadratureError, OracleError,
            ValueError, OSError) as exc:
        print(f"slesigma: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
