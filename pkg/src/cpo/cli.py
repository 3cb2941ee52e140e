"""Command-line interface.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 fit did not converge.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import __version__
from .analytic import resonance_shape
from .dressed import integrate_dressed, integrate_reduced, write_dressed_csv
from .errors import (CPOError, ConvergenceError, DomainError, GuessError, InsufficientSpanError,
                     IntegrationError, ParameterError, SolverError)
from .fitting import CompositeFit, fit_composite
from .harmonic import harmonic_steady_state
from .master import integrate_full, write_full_csv
from .params import load_config
from .plotting import emit_plot_script
from .scan import TIERS, analytic_spectrum, read_spectrum_csv, scan_delta, sweep_power

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_FIT = 4

logger = logging.getLogger("cpo")


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, str)) else repr(float(v)) for v in row])


def cmd_simulate(args):
    params = load_config(args.config)
    if args.tier == "full":
        traj = integrate_full(params, t_end=args.t_end, tol=args.tol)
        write_full_csv(traj, args.out)
    elif args.tier == "reduced":
        traj = integrate_reduced(params, t_end=args.t_end, tol=args.tol)
        traj.to_csv(args.out)
    elif args.tier == "dressed":
        traj = integrate_dressed(params, t_end=args.t_end, tol=args.tol)
        write_dressed_csv(traj, args.out)
    else:
        harmonic_steady_state(params, N=args.harmonics).to_csv(args.out)
    return EXIT_OK


def cmd_scan(args):
    params = load_config(args.config)
    if args.points < 2 or not args.delta_max > args.delta_min:
        raise ParameterError("need --points >= 2 and --delta-max > --delta-min")
    grid = np.linspace(args.delta_min, args.delta_max, args.points)
    spec = scan_delta(params, grid, args.tier, tol=args.tol)
    if args.noise:
        spec = spec.with_noise(args.noise * float(np.max(np.abs(spec.signal))), seed=args.seed)
    spec.to_csv(args.out)
    return EXIT_OK


def cmd_analytic(args):
    params = load_config(args.config)
    if not 0 < args.s_min < args.s_max or args.points < 2:
        raise ParameterError("need 0 < --s-min < --s-max and --points >= 2")
    S_grid = np.geomspace(args.s_min, args.s_max, args.points)
    rows = []
    for S in S_grid:
        sh = resonance_shape(params, S)
        rows.append((S, sh.A0, sh.A1, sh.w0, sh.w1))
    _write_rows(args.out, ["S", "A0", "A1", "w0", "w1"], rows)
    if args.lineshape_out:
        sh = resonance_shape(params)
        span = args.delta_max if args.delta_max else 5 * sh.w1
        spec = analytic_spectrum(params, np.linspace(-span, span, args.delta_points))
        _write_rows(args.lineshape_out, ["delta", "I"], zip(spec.delta, spec.signal))
    return EXIT_OK


def cmd_fit(args):
    spec = read_spectrum_csv(args.data)
    if args.guess == "auto":
        init = "auto"
    else:
        try:
            with open(args.guess) as fh:
                init = CompositeFit.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError, TypeError) as exc:
            raise ParameterError(f"cannot load guess {args.guess}: {exc}") from None
    fit = fit_composite(spec, init=init, n_components=args.components,
                        background=args.background, fit_center=not args.fixed_center,
                        max_iter=args.max_iter)
    fit.to_json(args.out)
    if not fit.converged:
        logger.error("fit did not converge: %s", fit.message)
        return EXIT_FIT
    return EXIT_OK


def _parse_list(text):
    try:
        return [float(v) for v in text.replace(",", " ").split()]
    except ValueError:
        raise ParameterError(f"cannot parse value list {text!r}") from None


def cmd_sweep(args):
    params = load_config(args.config)
    rows = sweep_power(params, _parse_list(args.s_values), args.tier, method=args.method,
                       points=args.points, tol=args.tol)
    _write_rows(args.out, ["S", "A0", "A1", "w0", "w1", "ok"],
                [(r.S, r.A0, r.A1, r.w0, r.w1, int(r.ok)) for r in rows])
    failed = sum(not r.ok for r in rows)
    if failed:
        logger.warning("%d of %d sweep points failed", failed, len(rows))
    return EXIT_OK


def cmd_plot(args):
    emit_plot_script(args.input, args.emit)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cpo", description="Bichromatically driven open two-level system toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one configuration in time")
    p.add_argument("--config", required=True)
    p.add_argument("--tier", choices=["full", "reduced", "dressed", "harmonic"], default="full")
    p.add_argument("--t-end", type=float, default=None,
                   help="end time; omit to run until the periodic steady state")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--harmonics", type=int, default=None,
                   help="truncation order for the harmonic tier (default: automatic)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scan", help="signal versus beat detuning")
    p.add_argument("--config", required=True)
    p.add_argument("--tier", choices=TIERS, default="analytic")
    p.add_argument("--delta-min", type=float, required=True)
    p.add_argument("--delta-max", type=float, required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--noise", type=float, default=0.0,
                   help="additive Gaussian noise as a fraction of the peak signal")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_scan)

    p = sub.add_parser("analytic", help="closed-form amplitudes and widths versus S")
    p.add_argument("--config", required=True)
    p.add_argument("--s-min", type=float, default=0.01)
    p.add_argument("--s-max", type=float, default=100.0)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--lineshape-out", default=None,
                   help="also write the lineshape (delta, I) at the configured drive")
    p.add_argument("--delta-max", type=float, default=None)
    p.add_argument("--delta-points", type=int, default=401)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_analytic)

    p = sub.add_parser("fit", help="fit a composite resonance to a spectrum CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--guess", default="auto", help="JSON file with a starting fit, or 'auto'")
    p.add_argument("--components", type=int, default=3)
    p.add_argument("--background", choices=["gaussian", "flat"], default="gaussian")
    p.add_argument("--fixed-center", action="store_true")
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("sweep", help="resonance parameters over saturation parameters")
    p.add_argument("--config", required=True)
    p.add_argument("--tier", choices=TIERS, default="analytic")
    p.add_argument("--method", choices=["closed", "fit"], default=None)
    p.add_argument("--s-values", required=True, help="comma or space separated list")
    p.add_argument("--points", type=int, default=201)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("plot", help="emit a matplotlib script for a CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--emit", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except GuessError as exc:
        logger.error("%s", exc)
        return EXIT_FIT
    except ParameterError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (IntegrationError, SolverError, ConvergenceError, DomainError,
            InsufficientSpanError) as exc:
        logger.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except CPOError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
