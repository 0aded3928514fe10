"""Command-line front end: price, surface, verify, calibrate."""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from typing import Optional

import numpy as np

from . import verification
from .calibrate import (DEFAULT_BOUNDS, CalibrationProblem, apply_params, calibrate,
                        read_quotes)
from .config import RunConfig, load_config, parse_config
from .errors import ConfigError, NumericError
from .impliedvol import surface
from .pricing import PricingRequest, price

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2
SURFACE_HEADER = ["maturity", "log_strike", "lmmr", "price0", "correction",
                  "price", "implied_vol", "flag"]


def fmt(value, precision: int = 12) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.{precision}g}"


def _request(cfg: RunConfig, t: float, k: float, kind: str = "call") -> PricingRequest:
    return PricingRequest(x=cfg.x, k=k, r=cfg.r, t=t, params=cfg.params, clock=cfg.clock,
                          payoff_kind=kind)


def _config(args) -> RunConfig:
    if args.config is None:
        if getattr(args, "preset", None) is None:
            raise ConfigError("either --config or --preset is required")
        return parse_config("", name="<preset>", preset=args.preset)
    return load_config(args.config, preset=getattr(args, "preset", None))


def cmd_price(args, out) -> int:
    cfg = _config(args)
    res = price(_request(cfg, cfg.maturity, math.log(cfg.strike), cfg.option_kind), cfg.contour)
    p = cfg.precision
    fields = [("kind", cfg.option_kind), ("strike", fmt(cfg.strike, p)),
              ("maturity", fmt(cfg.maturity, p)), ("price0", fmt(res.p0, p)),
              ("correction", fmt(res.correction, p)), ("price", fmt(res.total, p)),
              ("imag_residual", fmt(res.imag_residual, 3)),
              ("omega_i", fmt(res.contour_used.omega_i, p))]
    for name, value in fields:
        out.write(f"{name:<14}{value}\n")
    return EXIT_OK


def write_surface(table, fh, precision: int = 12):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(SURFACE_HEADER)
    for row in table.rows:
        writer.writerow([fmt(row.maturity, precision), fmt(row.log_strike, precision),
                         fmt(row.lmmr, precision), fmt(row.price0, precision),
                         fmt(row.correction, precision), fmt(row.price, precision),
                         fmt(row.implied_vol, precision), row.flag])


def cmd_surface(args, out) -> int:
    cfg = _config(args)
    template = _request(cfg, 1.0, cfg.x)
    table = surface(template, cfg.maturities, k_grid=cfg.log_strikes, lmmr=cfg.lmmr)
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        write_surface(table, fh, cfg.precision)
    bad = table.failures()
    out.write(f"wrote {len(table.rows)} rows to {args.out} ({len(bad)} flagged)\n")
    return EXIT_OK


def _parse_overrides(items) -> dict:
    overrides = {}
    for item in items or ():
        name, sep, value = item.partition("=")
        if not sep:
            raise ConfigError(f"--tolerance expects NAME=VALUE, got {item!r}")
        try:
            overrides[name.strip()] = float(value)
        except ValueError:
            raise ConfigError(f"--tolerance {name}: not a number: {value!r}") from None
    unknown = set(overrides) - set(verification.CHECKS)
    if unknown:
        raise ConfigError(f"unknown check(s) {sorted(unknown)}; known: {list(verification.CHECKS)}")
    return overrides


def cmd_verify(args, out) -> int:
    overrides = _parse_overrides(args.tolerance)
    n_paths = args.paths
    if n_paths < 1000:
        raise ConfigError("--paths must be >= 1000")
    outcomes = verification.run_all(seed=args.seed, n_paths=n_paths, tolerances=overrides)
    for o in outcomes:
        status = "PASS" if o.passed else "FAIL"
        out.write(f"{status}  {o.name:<22} residual={o.residual:.3e}  tol={o.tolerance:.3e}  {o.detail}\n")
    failed = [o.name for o in outcomes if not o.passed]
    out.write(f"{len(outcomes) - len(failed)}/{len(outcomes)} checks passed"
              + (f"; failed: {', '.join(failed)}\n" if failed else "\n"))
    return EXIT_NUMERIC if failed else EXIT_OK


def cmd_calibrate(args, out) -> int:
    cfg = _config(args)
    quotes = read_quotes(args.quotes)
    bounds = {name: cfg.bounds.get(name, DEFAULT_BOUNDS[name]) for name in cfg.free}
    problem = CalibrationProblem(quotes=tuple(quotes), free_params=cfg.free, bounds=bounds)
    result = calibrate(problem, cfg.params, cfg.clock, x=cfg.x, r=cfg.r, max_iter=cfg.max_iter)
    p = cfg.precision
    with open(args.out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["name", "value"])
        for name, value in result.values.items():
            writer.writerow([name, fmt(value, p)])
        writer.writerow(["rmse", fmt(result.rmse, p)])
        writer.writerow(["iterations", result.iterations])
        writer.writerow(["converged", int(result.converged)])
    for name, value in result.values.items():
        out.write(f"{name:<12}{fmt(value, p)}\n")
    out.write(f"free parameters: {len(cfg.free)}  quotes: {len(quotes)}\n")
    out.write(f"rmse: {fmt(result.rmse, 4)}  iterations: {result.iterations}  "
              f"converged: {'yes' if result.converged else 'no (best point reported)'}\n")
    for q, res in zip(quotes, result.residuals):
        out.write(f"  t={fmt(q.maturity, 6):<8} K={fmt(q.strike, 6):<10} "
                  f"residual={'out-of-band' if not np.isfinite(res) else fmt(res, 4)}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tcfmrsv",
                                     description="Time-changed fast mean-reverting SV option pricing.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="price one option")
    p.add_argument("--config")
    p.add_argument("--preset", choices=["fig1", "fig2", "fig3", "fig4"])
    p.set_defaults(func=cmd_price)

    s = sub.add_parser("surface", help="write an implied-vol surface CSV")
    s.add_argument("--config")
    s.add_argument("--preset", choices=["fig1", "fig2", "fig3", "fig4"])
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_surface)

    v = sub.add_parser("verify", help="run the oracle checks")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--paths", type=int, default=100_000, help="Monte-Carlo paths per check")
    v.add_argument("--tolerance", action="append", metavar="CHECK=VALUE",
                   help="override one check's tolerance (repeatable)")
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("calibrate", help="fit parameters to implied-vol quotes")
    c.add_argument("--config")
    c.add_argument("--preset", choices=["fig1", "fig2", "fig3", "fig4"])
    c.add_argument("--quotes", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)
    return parser


def main(argv: Optional[list] = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (ConfigError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG
    except NumericError as exc:
        sys.stderr.write(f"numeric failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
