"""Command line entry points.

``taeblp verify`` runs the exact oracle suite and prints a pass/fail
table; ``taeblp run`` executes one experiment from flags and/or a flat
key=value config file and writes CSV/JSON/PNG reports.  Exit codes:
0 ok, 1 check or validity failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import sys

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG_ERROR = 2


class ConfigError(Exception):
    pass


def _parse_config_file(path: str) -> dict:
    """Flat key=value lines; blank lines and #-comments ignored."""
    out = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _coerce(value: str):
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if "," in value:
        return [_coerce(v) for v in value.split(",")]
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="taeblp",
        description="exact bricklayers-process simulator and verification lab",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    pv = sub.add_parser("verify", help="run the exact oracle suite")
    pv.add_argument("--beta", type=float, action="append", default=None,
                    help="beta value(s) for the algebraic checks (repeatable)")
    pv.add_argument("--d-max", type=int, default=60)
    pv.add_argument("--band", type=int, default=25)
    pv.add_argument("--fast", action="store_true", help="trim the heavier summations")

    pr = sub.add_parser("run", help="run one experiment and write reports")
    pr.add_argument("--config", help="flat key=value config file; flags override")
    pr.add_argument("--experiment", help="experiment name")
    pr.add_argument("--rho", type=float)
    pr.add_argument("--theta", type=float)
    pr.add_argument("--beta", type=float)
    pr.add_argument("--t", type=float)
    pr.add_argument("--t-grid", help="comma-separated times (scaling scan)")
    pr.add_argument("--window", nargs=2, type=int, metavar=("ELL", "R"))
    pr.add_argument("--replicas", type=int)
    pr.add_argument("--seed", type=int)
    pr.add_argument("--omega-max", type=int)
    pr.add_argument("--tail-tol", type=float)
    pr.add_argument("--workers", type=int)
    pr.add_argument("--outdir", default="out")
    return parser


def cmd_verify(args) -> int:
    from .oracle import run_all_checks

    betas = tuple(args.beta) if args.beta else (0.25, 0.5, 1.0, 2.0)
    for beta in betas:
        if beta <= 0:
            print(f"error: beta must be positive, got {beta}", file=sys.stderr)
            return EXIT_CONFIG_ERROR
    checks = run_all_checks(betas=betas, d_max=args.d_max, band=args.band, fast=args.fast)
    width = max(len(c.name) for c in checks)
    failed = 0
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status}  {c.name:<{width}}  max_err={c.max_err:.3e}")
        if not c.passed:
            failed += 1
            for f in c.failures[:10]:
                print(f"      {f}")
    print(f"{len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_CHECK_FAILED


def _experiment_kwargs(args) -> tuple[str, dict]:
    settings = {}
    if args.config:
        settings.update(_parse_config_file(args.config))
    flag_map = {
        "experiment": args.experiment,
        "rho": args.rho,
        "theta": args.theta,
        "beta": args.beta,
        "t": args.t,
        "t_grid": args.t_grid,
        "replicas": args.replicas,
        "seed": args.seed,
        "omega_max": args.omega_max,
        "tail_tol": args.tail_tol,
        "workers": args.workers,
    }
    for key, value in flag_map.items():
        if value is not None:
            settings[key] = value
    if args.window is not None:
        settings["window"] = tuple(args.window)

    name = settings.pop("experiment", None)
    if not name:
        raise ConfigError("missing experiment name (flag --experiment or config key)")
    kwargs = {}
    for key, value in settings.items():
        if isinstance(value, str):
            value = _coerce(value)
        kwargs[key] = value
    if "window" in kwargs and not isinstance(kwargs["window"], tuple):
        win = kwargs["window"]
        if not (isinstance(win, list) and len(win) == 2):
            raise ConfigError(f"window must be two integers, got {win!r}")
        kwargs["window"] = (int(win[0]), int(win[1]))
    if "t_grid" in kwargs:
        grid = kwargs["t_grid"]
        if isinstance(grid, (int, float)):
            grid = [grid]
        kwargs["t_grid"] = tuple(float(g) for g in grid)
    return str(name), kwargs


def cmd_run(args) -> int:
    from .experiments import EXPERIMENTS
    from .reporting import write_report

    try:
        name, kwargs = _experiment_kwargs(args)
        if name not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {name!r}; available: {', '.join(sorted(EXPERIMENTS))}"
            )
        if "beta" in kwargs and not kwargs["beta"] > 0:
            raise ConfigError(f"beta must be positive, got {kwargs['beta']}")
        if "replicas" not in kwargs:
            raise ConfigError("missing replicas (flag --replicas or config key)")
        if kwargs["replicas"] < 1:
            raise ConfigError("replicas must be >= 1")
        if "rho" in kwargs and "theta" in kwargs:
            raise ConfigError("give exactly one of rho and theta")
        if "window" in kwargs:
            lo, hi = kwargs["window"]
            if not (lo < 0 < hi):
                raise ConfigError(f"window must contain the origin, got ({lo}, {hi})")
        outdir = args.outdir
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    fn = EXPERIMENTS[name]
    try:
        report = fn(**kwargs)
    except TypeError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    paths = write_report(report, outdir)
    for label, path in sorted(paths.items()):
        print(f"{label}: {path}")
    for note in report.notes:
        print(f"note: {note}")
    if not report.valid:
        print(
            f"INVALID: contaminated fraction {report.contaminated_fraction:.2%} exceeds 1%",
            file=sys.stderr,
        )
        return EXIT_CHECK_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "run":
        return cmd_run(args)
    parser.error("unknown command")
    return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
