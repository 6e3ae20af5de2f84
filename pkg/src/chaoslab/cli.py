"""Command-line entry point.

Exit codes: 0 success, 1 a verification check failed, 2 usage error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import experiments
from .analytics import DEFAULT_HALF_WIDTH, DEFAULT_POINTS
from .exceptions import ChaosLabError
from .montecarlo import McConfig

EXIT_OK, EXIT_CHECK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _hurst_list(values):
    out = []
    for v in values:
        out.extend(float(x) for x in str(v).split(",") if x)
    return out


def _json_default(o):
    if hasattr(o, "item"):
        return o.item()
    if hasattr(o, "tolist"):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _dump(obj):
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default, allow_nan=False) + "\n"


def _emit(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        parent = os.path.dirname(os.path.abspath(out))
        os.makedirs(parent, exist_ok=True)
        with open(out, "w") as fh:
            fh.write(text)


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc


def _pick(flag, config, key, default):
    if flag is not None:
        return flag
    return config.get(key, default)


def run_rates(args):
    config = _load_config(args.config)
    hursts = _hurst_list(args.hurst) if args.hurst else [float(h) for h in config.get("hurst", experiments.DEFAULT_HURST)]
    n_min = _pick(args.n_min, config, "n_min", 2 ** 6)
    n_max = _pick(args.n_max, config, "n_max", 2 ** 12)
    samples = _pick(args.samples, config, "samples", 1_000_000)
    seed = _pick(args.seed, config, "seed", 0)
    try:
        n_list = experiments.geometric_n(int(n_min), int(n_max))
        cfg = McConfig(int(samples), int(seed), n_jobs=1) if samples else None
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if n_min < 64:
        raise UsageError("--n-min must be at least 64")
    for h in hursts:
        if not 0.0 < h < 1.0:
            raise UsageError(f"Hurst index must lie in (0, 1), got {h}")
    table = experiments.cmd_rates(hursts, n_list, cfg, args.half_width, args.points, jobs=args.jobs)
    _emit(table.to_csv() if args.format == "csv" else table.to_json(), args.out)
    return EXIT_OK


def run_verify(args):
    matrix = None
    if args.matrix not in (None, "default"):
        try:
            matrix = experiments.load_matrix(args.matrix)
        except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
            raise UsageError(f"bad matrix file {args.matrix}: {exc}") from exc
    try:
        cfg = McConfig(args.samples, args.seed) if args.samples else None
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    passed, report = experiments.cmd_verify(args.suite, matrix, cfg)
    _emit(_dump(report), args.out)
    return EXIT_OK if passed else EXIT_CHECK


def run_density(args):
    if not 0.0 < args.hurst < 1.0:
        raise UsageError("Hurst index must lie in (0, 1)")
    if args.points < 2 ** 12 or args.points & (args.points - 1):
        raise UsageError("--points must be a power of two >= 4096")
    if not args.half_width > 0:
        raise UsageError("--half-width must be positive")
    _, rep = experiments.cmd_density(args.hurst, args.n, args.half_width, args.points, args.out)
    sys.stdout.write(_dump({"schema": experiments.SCHEMA, **rep.to_dict()}))
    return EXIT_OK


def run_negmoments(args):
    if not 0.0 < args.hurst < 1.0:
        raise UsageError("Hurst index must lie in (0, 1)")
    if not 0.0 <= args.power <= 8.0:
        raise UsageError("--power must lie in [0, 8]")
    try:
        cfg = McConfig(args.samples, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    row = experiments.negmoment_row(args.hurst, args.n, args.power, cfg)
    _emit(_dump({"schema": experiments.SCHEMA, "rows": [row]}), args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="chaoslab", description="Quadratic variation of fractional Gaussian noise.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("rates", help="rate table over a (h, n) matrix")
    p.add_argument("--hurst", nargs="+", help="Hurst indices, space or comma separated")
    p.add_argument("--n-min", type=int)
    p.add_argument("--n-max", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--samples", type=int, help="Monte Carlo samples per row; 0 skips the Stein column")
    p.add_argument("--out", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--config", help="JSON file supplying hurst, n_min, n_max, samples, seed")
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--half-width", type=float, default=DEFAULT_HALF_WIDTH)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=run_rates)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", required=True, choices=sorted(experiments.SUITES))
    p.add_argument("--matrix", default="default", help="'default' or a JSON matrix file")
    p.add_argument("--samples", type=int, default=20_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=run_verify)

    p = sub.add_parser("density", help="density grid and distance report")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--points", type=int, default=DEFAULT_POINTS)
    p.add_argument("--half-width", type=float, default=DEFAULT_HALF_WIDTH)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=run_density)

    p = sub.add_parser("negmoments", help="Monte Carlo negative moment of the derivative norm")
    p.add_argument("--hurst", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--power", type=float, required=True)
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=run_negmoments)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"chaoslab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ChaosLabError, FloatingPointError, ArithmeticError) as exc:
        print(f"chaoslab: numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"chaoslab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
