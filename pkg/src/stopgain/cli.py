"""Command-line front end.

Subcommands cover closed-form evaluation (``eval``, ``curve``, ``stoptime``),
simulation (``simulate``) and verification (``verify``, ``figure``).  Exit
codes: 0 success, 1 a verification gate failed, 2 invalid input.  Every flag
may also come from a ``key=value`` config file; explicit flags win.
"""

import argparse
import json
import math
import os
import sys
from contextlib import nullcontext

import numpy as np

from . import verify as _verify
from .cdf import CdfQuery, ShorthandContext, cdf_no_stop, cdf_with_stop, stopping_time_cdf
from .errors import StopgainError
from .model import MarketParams, TradeSpec
from .simulate import PathGrid, run_batch

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_GATE = 1
EXIT_USAGE = 2

OUT_DIR_ENV = "STOPGAIN_OUT_DIR"


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("true", "1", "yes", "on"):
        return True
    if lowered in ("false", "0", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# converters for config-file values; set_defaults() skips argparse's type=
_CONFIG_TYPES = {
    "mu": float,
    "sigma": float,
    "s0": float,
    "sstar": float,
    "u0": float,
    "k": float,
    "v0": float,
    "t": float,
    "x": float,
    "xmin": float,
    "xmax": float,
    "gate": float,
    "points": int,
    "paths": int,
    "steps": int,
    "seed": int,
    "workers": int,
    "no_stop": _parse_bool,
    "with_no_stop": _parse_bool,
    "bridge": _parse_bool,
    "out": str,
    "out_dir": str,
}


def _load_config(path: str) -> dict:
    """Parse a key=value file into typed defaults; '#' starts a comment."""
    overrides = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value (got {line!r})")
            key, value = line.split("=", 1)
            key = key.strip().lower().replace("-", "_")
            if key not in _CONFIG_TYPES:
                raise ValueError(f"{path}:{lineno}: unknown option {key!r}")
            try:
                overrides[key] = _CONFIG_TYPES[key](value.strip())
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
    return overrides


def _market_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("market")
    g.add_argument("--mu", type=float, default=0.5, help="price drift per unit time")
    g.add_argument("--sigma", type=float, default=1.0, help="price volatility, > 0")
    g.add_argument("--s0", type=float, default=1.0, help="initial price, > 0")


def _trade_args(p: argparse.ArgumentParser):
    g = p.add_argument_group("trading rule")
    g.add_argument("--sstar", type=float, default=None, help="stop price, 0 < sstar < s0")
    g.add_argument("--u0", type=float, default=1.0, help="initial investment, > 0")
    g.add_argument("--k", type=float, default=1.0, help="feedback gain, > 0")
    g.add_argument("--v0", type=float, default=None, help="initial account value (default u0/k)")
    g.add_argument(
        "--no-stop", action="store_true", help="disable the stop order; use the free-running law"
    )


def _horizon_arg(p: argparse.ArgumentParser):
    p.add_argument("--t", type=float, default=1.0, help="time horizon, > 0")


def _sim_args(p: argparse.ArgumentParser, default_paths: int, default_seed: int):
    g = p.add_argument_group("simulation")
    g.add_argument("--paths", type=int, default=default_paths, help="number of sample paths")
    g.add_argument(
        "--steps", type=int, default=None, help="grid steps over the horizon (default 1024 per unit time)"
    )
    g.add_argument("--seed", type=int, default=default_seed, help="master seed")
    g.add_argument("--bridge", dest="bridge", action="store_true", default=True,
                   help="sample intra-step barrier crossings (default)")
    g.add_argument("--no-bridge", dest="bridge", action="store_false",
                   help="grid-only stop detection")
    g.add_argument("--workers", type=int, default=1, help="worker processes")


def _config_arg(p: argparse.ArgumentParser):
    p.add_argument("--config", default=None, metavar="FILE",
                   help="key=value file supplying defaults for any flag")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="stopgain",
        description="Profit/loss distribution of a stop-protected feedback trading rule.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    # "required" flags default to None and are checked in the command
    # functions instead, so a config file can supply them
    p = sub.add_parser("eval", help="evaluate the gain distribution at one point")
    _market_args(p); _trade_args(p); _horizon_arg(p); _config_arg(p)
    p.add_argument("--x", type=float, default=None, help="gain level to evaluate at")
    p.set_defaults(func=cmd_eval)
    subparsers["eval"] = p

    p = sub.add_parser("curve", help="tabulate the gain distribution over a range")
    _market_args(p); _trade_args(p); _horizon_arg(p); _config_arg(p)
    p.add_argument("--xmin", type=float, default=None)
    p.add_argument("--xmax", type=float, default=None)
    p.add_argument("--points", type=int, default=256, help="row count, >= 2")
    p.add_argument("--with-no-stop", action="store_true",
                   help="add the free-running law as a third column")
    p.add_argument("--out", default=None, metavar="FILE", help="CSV destination (default stdout)")
    p.set_defaults(func=cmd_curve)
    subparsers["curve"] = p

    p = sub.add_parser("stoptime", help="probability the stop has fired by the horizon")
    _market_args(p); _trade_args(p); _horizon_arg(p); _config_arg(p)
    p.set_defaults(func=cmd_stoptime)
    subparsers["stoptime"] = p

    p = sub.add_parser("simulate", help="sample terminal gains and stop times")
    _market_args(p); _trade_args(p); _horizon_arg(p); _config_arg(p)
    _sim_args(p, default_paths=1000, default_seed=1234)
    p.add_argument("--out", default=None, metavar="FILE", help="CSV destination (default stdout)")
    p.set_defaults(func=cmd_simulate)
    subparsers["simulate"] = p

    p = sub.add_parser("verify", help="compare simulation against the closed forms")
    _market_args(p); _trade_args(p); _horizon_arg(p); _config_arg(p)
    _sim_args(p, default_paths=50_000, default_seed=1234)
    p.add_argument("--gate", type=float, default=_verify.DEFAULT_SUP_GATE,
                   help="sup-distance threshold for the CDF comparison")
    p.add_argument("--out", default=None, metavar="FILE", help="JSON destination (default stdout)")
    p.set_defaults(func=cmd_verify)
    subparsers["verify"] = p

    p = sub.add_parser("figure", help="reproduce one of the three demo comparisons")
    p.add_argument("which", type=int, choices=(1, 2, 3))
    _config_arg(p)
    _sim_args(p, default_paths=_verify.DEFAULT_FIGURE_PATHS, default_seed=13)
    p.add_argument("--gate", type=float, default=_verify.DEFAULT_SUP_GATE,
                   help="sup-distance threshold for both comparison legs")
    p.add_argument("--out-dir", default=None, metavar="DIR",
                   help=f"dataset/report directory (default ${OUT_DIR_ENV} or '.')")
    p.set_defaults(func=cmd_figure)
    subparsers["figure"] = p

    return parser, subparsers


def _build_market(args) -> MarketParams:
    return MarketParams(mu=args.mu, sigma=args.sigma, s0=args.s0)


def _build_trade(args) -> TradeSpec:
    v0 = args.u0 / args.k if args.v0 is None else args.v0
    s_star = None if args.no_stop else args.sstar
    return TradeSpec(u0=args.u0, k=args.k, v0=v0, s_star=s_star)


def _resolved_config(args, tr: TradeSpec, sim: bool = False, grid: PathGrid | None = None) -> dict:
    cfg = {
        "mu": args.mu, "sigma": args.sigma, "s0": args.s0,
        "u0": tr.u0, "k": tr.k, "v0": tr.v0,
        "s_star": tr.s_star, "stop_enabled": tr.s_star is not None,
        "t": args.t,
    }
    if sim:
        cfg.update(
            paths=args.paths,
            steps=grid.n_steps,
            seed=args.seed,
            bridge=args.bridge,
            workers=args.workers,
        )
    return cfg


def _grid_from(args) -> PathGrid:
    if args.steps is None:
        return PathGrid.default(args.t)
    return PathGrid(args.t, args.steps)


def _jsonable(obj):
    """Recursively convert to JSON-safe plain types; non-finite floats -> None."""
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def _dump_json(report: dict, out: str | None):
    text = json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n"
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text)


def _open_out(out: str | None):
    return nullcontext(sys.stdout) if out is None else open(out, "w", encoding="utf-8", newline="")


def cmd_eval(args) -> int:
    if args.x is None:
        print("error: --x is required (flag or config file)", file=sys.stderr)
        return EXIT_USAGE
    m = _build_market(args)
    tr = _build_trade(args)
    ctx = ShorthandContext(m, tr)
    law = cdf_with_stop if tr.s_star is not None else cdf_no_stop
    value = law(CdfQuery(args.x, args.t), ctx)
    print(f"{value.p:.17g} {value.branch}")
    return EXIT_OK


def cmd_curve(args) -> int:
    if args.xmin is None or args.xmax is None:
        print("error: --xmin and --xmax are required (flag or config file)", file=sys.stderr)
        return EXIT_USAGE
    m = _build_market(args)
    tr = _build_trade(args)
    ctx = ShorthandContext(m, tr)
    if not args.xmin < args.xmax:
        print(f"error: xmin must be < xmax (got {args.xmin}, {args.xmax})", file=sys.stderr)
        return EXIT_USAGE
    if args.points < 2:
        print(f"error: points must be >= 2 (got {args.points})", file=sys.stderr)
        return EXIT_USAGE
    law = cdf_with_stop if tr.s_star is not None else cdf_no_stop
    xs = np.linspace(args.xmin, args.xmax, args.points)
    with _open_out(args.out) as f:
        f.write("x,F,F0\n" if args.with_no_stop else "x,F\n")
        for x in xs:
            row = f"{x:.17g},{law(CdfQuery(float(x), args.t), ctx).p:.17g}"
            if args.with_no_stop:
                row += f",{cdf_no_stop(CdfQuery(float(x), args.t), ctx).p:.17g}"
            f.write(row + "\n")
    return EXIT_OK


def cmd_stoptime(args) -> int:
    m = _build_market(args)
    tr = _build_trade(args)
    if tr.s_star is None:
        print("error: stoptime requires a stop order (--sstar without --no-stop)", file=sys.stderr)
        return EXIT_USAGE
    ctx = ShorthandContext(m, tr)
    if not args.t > 0:
        print(f"error: t must be > 0 (got {args.t})", file=sys.stderr)
        return EXIT_USAGE
    print(f"{stopping_time_cdf(args.t, ctx):.17g}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    m = _build_market(args)
    tr = _build_trade(args)
    grid = _grid_from(args)
    with _open_out(args.out) as f:
        f.write("path_index,t_star,terminal_g\n")
        run_batch(
            m, tr, grid, args.paths, args.seed,
            bridge=args.bridge, n_workers=args.workers, sink=f,
        )
    return EXIT_OK


def cmd_verify(args) -> int:
    m = _build_market(args)
    tr = _build_trade(args)
    grid = _grid_from(args)
    report = {"config": _resolved_config(args, tr, sim=True, grid=grid), "gate": args.gate}

    if tr.s_star is not None:
        comparison = _verify.replicate(
            mu=m.mu, sigma=m.sigma, s0=m.s0, s_star=tr.s_star, u0=tr.u0, k=tr.k,
            t_end=args.t, n_paths=args.paths, n_steps=grid.n_steps, master_seed=args.seed,
            bridge=args.bridge, v0=tr.v0, n_workers=args.workers,
        )
        cdf_ok = comparison.sup_distance <= args.gate
        report["cdf_comparison"] = {
            "sup_distance": comparison.sup_distance,
            "n_grid": len(comparison.grid),
            "passed": cdf_ok,
        }
    else:
        cdf_ok = True
        report["cdf_comparison"] = {"skipped": "no stop order; nothing to gate"}

    props = _verify.property_suite(m, tr, grid, args.paths, args.seed, bridge=args.bridge)
    report["properties"] = {
        leg.name: {"status": leg.status, **leg.detail} for leg in props.legs
    }
    passed = cdf_ok and props.passed
    report["passed"] = passed
    _dump_json(report, args.out)
    return EXIT_OK if passed else EXIT_GATE


def cmd_figure(args) -> int:
    out_dir = args.out_dir or os.environ.get(OUT_DIR_ENV) or "."
    os.makedirs(out_dir, exist_ok=True)
    result = _verify.reproduce_figure(
        args.which, n_paths=args.paths, master_seed=args.seed,
        n_steps=args.steps, n_workers=args.workers, bridge=args.bridge,
    )
    csv_path = os.path.join(out_dir, f"figure{args.which}.csv")
    columns = ["x", "F0_theory", "F_theory", "F0_empirical", "F_empirical"]
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(columns) + "\n")
        data = [result.dataset[c] for c in columns]
        for row in zip(*data):
            f.write(",".join(f"{v:.17g}" for v in row) + "\n")

    stop_ok = result.report.sup_distance <= args.gate
    free_ok = result.no_stop_report.sup_distance <= args.gate
    report = {
        "config": dict(result.report.metadata, workers=args.workers, gate=args.gate),
        "sup_distance": result.report.sup_distance,
        "sup_distance_no_stop": result.no_stop_report.sup_distance,
        "n_grid": len(result.report.grid),
        "passed": stop_ok and free_ok,
        "dataset": csv_path,
    }
    json_path = os.path.join(out_dir, f"figure{args.which}.json")
    _dump_json(report, json_path)
    _dump_json(report, None)
    return EXIT_OK if report["passed"] else EXIT_GATE


def main(argv=None) -> int:
    parser, subparsers = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        try:
            overrides = _load_config(args.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        subparsers[args.command].set_defaults(**overrides)
        args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StopgainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
