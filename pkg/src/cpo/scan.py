"""Beat-detuning scans and power sweeps across the model tiers.

A scan keeps the second field fixed and moves the first one,
``omega1 = omega2 + delta``.  Each grid point is independent; set the
``CPO_THREADS`` environment variable to evaluate points in parallel
worker processes.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .analytic import fluorescence_signal, resonance_shape
from .dressed import reduced_steady_state
from .errors import CPOError, ParameterError
from .fitting import auto_initial_guess, fit_composite
from .harmonic import harmonic_steady_state
from .master import full_steady_state
from .params import with_beat, with_saturation

__all__ = [
    "Spectrum",
    "TIERS",
    "scan_delta",
    "analytic_spectrum",
    "sweep_power",
    "SweepRow",
    "read_spectrum_csv",
    "thread_count",
]

logger = logging.getLogger(__name__)

TIERS = ("full", "reduced", "harmonic", "analytic")


@dataclass
class Spectrum:
    """Signal sampled on a strictly increasing beat-detuning grid."""

    delta: np.ndarray
    signal: np.ndarray
    tier: str
    params: object = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.delta = np.asarray(self.delta, dtype=float)
        self.signal = np.asarray(self.signal, dtype=float)
        if self.delta.ndim != 1 or self.delta.shape != self.signal.shape:
            raise ParameterError("delta and signal must be 1-D arrays of equal length")
        if self.delta.size == 0:
            raise ParameterError("empty spectrum")
        if np.any(np.diff(self.delta) <= 0):
            raise ParameterError("delta grid must be strictly increasing")
        if not (np.all(np.isfinite(self.delta)) and np.all(np.isfinite(self.signal))):
            raise ParameterError("spectrum contains non-finite values")

    def __len__(self):
        return self.delta.size

    def with_noise(self, sigma, seed=None):
        """Copy with additive Gaussian noise of standard deviation ``sigma``."""
        rng = np.random.default_rng(seed)
        noisy = self.signal + rng.normal(0.0, sigma, self.signal.size)
        return Spectrum(self.delta, noisy, self.tier, self.params,
                        dict(self.meta, noise=sigma, seed=seed))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "signal"])
            for d, s in zip(self.delta, self.signal):
                w.writerow([repr(float(d)), repr(float(s))])


def read_spectrum_csv(path):
    """Import a two-column (delta, signal) CSV.

    Lines starting with ``#`` are comments; a non-numeric first row is
    taken as a header.  Rows are sorted by delta.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParameterError(f"cannot read spectrum {path}: {exc}") from None
    rows = []
    reader = csv.reader(io.StringIO(text))
    for lineno, row in enumerate(reader, 1):
        if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
            continue
        if len(row) < 2:
            raise ParameterError(f"{path}:{lineno}: expected two columns")
        try:
            rows.append((float(row[0]), float(row[1])))
        except ValueError:
            if rows:
                raise ParameterError(f"{path}:{lineno}: non-numeric value") from None
            continue  # header
    if not rows:
        raise ParameterError(f"{path}: no data rows")
    data = np.array(sorted(rows))
    if np.any(np.diff(data[:, 0]) == 0):
        raise ParameterError(f"{path}: duplicate delta values")
    return Spectrum(data[:, 0], data[:, 1], "imported", meta={"source": str(path)})


def thread_count():
    """Worker count from ``CPO_THREADS`` (default 1)."""
    raw = os.environ.get("CPO_THREADS", "1").strip() or "1"
    try:
        n = int(raw)
    except ValueError:
        raise ParameterError(f"CPO_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ParameterError(f"CPO_THREADS must be >= 1, got {n}")
    return n


def _point(args):
    params, delta, tier, tol = args
    q = with_beat(params, delta)
    try:
        if tier == "full":
            return full_steady_state(q, tol=tol)[0]
        if tier == "reduced":
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                return reduced_steady_state(q, tol=tol)[0]
        if tier == "harmonic":
            return harmonic_steady_state(q).mean_diff
        return fluorescence_signal(delta, q)
    except CPOError as exc:
        exc.delta = delta
        exc.args = (f"at delta={delta:g}: {exc}",) + exc.args[1:]
        raise


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def scan_delta(params, grid, tier="analytic", tol=1e-8, workers=None):
    """Period-averaged population difference on a grid of beat detunings.

    Parameters
    ----------
    params : SystemParams
        Base configuration; ``omega2`` and the Rabi frequencies are kept,
        ``omega1`` is set to ``omega2 + delta`` at each point.
    grid : array_like
        Strictly increasing beat detunings.
    tier : {"full", "reduced", "harmonic", "analytic"}
    tol : float
        Integrator tolerance for the time-domain tiers.
    workers : int, optional
        Parallel workers; defaults to ``CPO_THREADS``.

    Notes
    -----
    The saturation parameter used by the reduced and analytic tiers is
    evaluated at each point, since moving ``omega1`` changes its detuning.
    """
    if tier not in TIERS:
        raise ParameterError(f"tier must be one of {TIERS}, got {tier!r}")
    grid = np.asarray(grid, dtype=float)
    workers = thread_count() if workers is None else workers
    values = _map(_point, [(params, float(d), tier, tol) for d in grid], workers)
    return Spectrum(grid, np.array(values, dtype=float), tier, params)


def analytic_spectrum(params, grid, S=None):
    """Lineshape at a fixed saturation parameter (no per-point recomputation)."""
    shape = resonance_shape(params, S)
    grid = np.asarray(grid, dtype=float)
    return Spectrum(grid, shape(grid), "analytic", params, {"S": shape.S})


@dataclass(frozen=True)
class SweepRow:
    S: float
    A0: float
    A1: float
    w0: float
    w1: float
    ok: bool = True
    message: str = ""


def _default_grid(params, S, points=201):
    shape = resonance_shape(params, S)
    return np.linspace(-5 * shape.w1, 5 * shape.w1, points)


def _sweep_point(args):
    params, S, tier, method, points, tol = args
    try:
        if tier == "analytic" and method == "closed":
            sh = resonance_shape(params, S)
            return SweepRow(S, sh.A0, sh.A1, sh.w0, sh.w1)
        grid = _default_grid(params, S, points)
        if tier == "analytic":
            spec = analytic_spectrum(params, grid, S)
        else:
            # zero beat is a phase-locked stationary drive, not the limit of
            # the beat average, so it is left out of the fitted spectrum
            grid = grid[grid != 0.0]
            spec = scan_delta(with_saturation(params, S), grid, tier, tol=tol, workers=1)
        guess = auto_initial_guess(spec, n_components=2, background="flat")
        fit = fit_composite(spec, init=replace(guess, center=0.0), n_components=2,
                            background="flat", fit_center=False)
        A0, A1 = fit.relative_amplitudes()
        ok = fit.converged and fit.identifiable
        return SweepRow(S, A0, A1, fit.widths[0], fit.widths[1], ok, fit.message)
    except CPOError as exc:
        logger.warning("sweep point S=%g failed: %s", S, exc)
        nan = math.nan
        return SweepRow(S, nan, nan, nan, nan, False, str(exc))


def sweep_power(params, S_grid, tier="analytic", method=None, points=201, tol=1e-8,
                workers=None):
    """Resonance parameters ``(S, A0, A1, w0, w1)`` over saturation parameters.

    ``method="closed"`` (the default for the analytic tier) evaluates the
    closed forms; ``method="fit"`` (forced for numeric tiers) fits two
    Lorentzians on a flat background to a simulated scan.  Points that fail
    are returned with ``ok=False`` and the sweep continues.
    """
    if tier not in TIERS:
        raise ParameterError(f"tier must be one of {TIERS}, got {tier!r}")
    if method is None:
        method = "closed" if tier == "analytic" else "fit"
    if method not in ("closed", "fit"):
        raise ParameterError(f"method must be 'closed' or 'fit', got {method!r}")
    if method == "closed" and tier != "analytic":
        raise ParameterError("closed-form sweep is only available for the analytic tier")
    S_grid = np.asarray(S_grid, dtype=float)
    if np.any(S_grid <= 0) or not np.all(np.isfinite(S_grid)):
        raise ParameterError("S values must be positive and finite")
    workers = thread_count() if workers is None else workers
    items = [(params, float(S), tier, method, points, tol) for S in S_grid]
    return _map(_sweep_point, items, workers)
