"""Explicit adaptive Runge-Kutta integration and periodic steady-state detection.

The stepper is the Dormand-Prince 5(4) pair with a PI step-size controller.
Steps are clipped so that every requested output time is hit exactly, which
keeps period averages on uniform samples (trapezoidal rule is spectrally
accurate for smooth periodic integrands).
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import IntegrationError, InsufficientSpanError

__all__ = [
    "Trajectory",
    "dopri54",
    "sample_grid",
    "integrate_periodic",
    "detect_transient",
    "period_average",
    "beat_period",
]

logger = logging.getLogger(__name__)

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [np.asarray(row) for row in [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]]
# difference between 5th and embedded 4th order weights
_E = np.array([
    71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40,
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents (Gustafsson), order-5 pair
_ALPHA = 0.7 / 5
_BETA = 0.4 / 5


@dataclass
class Trajectory:
    """Time samples of an integrated state.

    ``y[i]`` holds the state at ``t[i]``; ``columns`` names the state
    components.  ``transient_end`` marks the time after which the solution is
    declared periodic (``None`` when no steady state was detected).
    """

    t: np.ndarray
    y: np.ndarray
    columns: tuple
    tier: str
    params: object = None
    settings: dict = field(default_factory=dict)
    transient_end: float | None = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.t.ndim != 1 or self.t.size == 0:
            raise ValueError("trajectory needs a non-empty 1-D time array")
        if self.y.shape[0] != self.t.size:
            raise ValueError("state rows must match time samples")
        if self.y.ndim == 1:
            self.y = self.y[:, None]
        if len(self.columns) != self.y.shape[1]:
            raise ValueError("column names must match state width")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.t.size

    def column(self, name):
        return self.y[:, self.columns.index(name)]

    def populations(self):
        """Return ``(n1, n0)`` sample arrays."""
        for a, b in (("rho11", "rho00"), ("n1", "n0")):
            if a in self.columns and b in self.columns:
                return self.column(a), self.column(b)
        raise KeyError(f"trajectory of tier {self.tier!r} carries no populations")

    def to_csv(self, path, extra=None):
        """Write ``t`` plus all state columns (and ``extra`` name->array columns)."""
        extra = extra or {}
        header = ["t", *self.columns, *extra]
        cols = [self.t, *self.y.T, *(np.asarray(v, dtype=float) for v in extra.values())]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])


def _error_norm(err, y, y_new, rtol, atol):
    r = err / (atol + rtol * np.maximum(np.abs(y), np.abs(y_new)))
    return math.sqrt(float(r @ r) / r.size)


def _initial_step(fun, t0, y0, f0, rtol, atol):
    # Hairer, Norsett & Wanner, Solving ODEs I, II.4
    scale = atol + rtol * np.abs(y0)
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * f0
    f1 = fun(t0 + h0, y1)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri54(fun, t0, y0, t_out, rtol=1e-8, atol=1e-10, max_step=np.inf,
            h0=None, max_steps=50_000_000):
    """Integrate ``y' = fun(t, y)`` and return the states at ``t_out``.

    Parameters
    ----------
    fun : callable
        Right-hand side, ``fun(t, y) -> ndarray``.
    t0 : float
        Initial time.
    y0 : array_like
        Real initial state.
    t_out : array_like
        Strictly increasing output times, all ``>= t0``.
    rtol, atol : float
        Local error tolerances (mixed absolute/relative RMS norm).
    max_step : float
        Upper bound on the step size.

    Returns
    -------
    y_out : ndarray, shape (len(t_out), len(y0))
    stats : dict
        ``nsteps``, ``nrejected``, ``nfev`` and the last accepted step ``h``.

    Raises
    ------
    IntegrationError
        On step-size underflow or a non-finite state.
    """
    t_out = np.asarray(t_out, dtype=float)
    y = np.array(y0, dtype=float)
    if t_out.size and t_out[0] < t0:
        raise ValueError("output times must not precede t0")
    out = np.empty((t_out.size, y.size))
    t = float(t0)
    f = np.asarray(fun(t, y), dtype=float)
    nfev = 1
    if h0 is None:
        h = _initial_step(fun, t, y, f, rtol, atol)
        nfev += 1
    else:
        h = float(h0)
    h = min(h, max_step)
    err_prev = 1.0
    nsteps = nrej = 0
    k = np.empty((7, y.size))
    nodes = _C.tolist()
    idx = 0
    while idx < t_out.size and t_out[idx] == t:
        out[idx] = y
        idx += 1
    while idx < t_out.size:
        target = t_out[idx]
        min_step = 16 * np.spacing(max(abs(t), abs(target), 1.0))
        if h < min_step:
            raise IntegrationError(
                f"step size underflow at t={t:.6g} (h={h:.3g}); problem too stiff "
                "for the explicit integrator", t=t)
        h_try = h
        land = t + h_try >= target - min_step
        if land:
            h_try = target - t
        k[0] = f
        for s in range(1, 7):
            ys = y + h_try * (_A[s] @ k[:s])
            k[s] = fun(t + nodes[s] * h_try, ys)
        nfev += 6
        err = h_try * (_E @ k)
        en = _error_norm(err, y, ys, rtol, atol)
        if not math.isfinite(en):
            raise IntegrationError(f"non-finite state near t={t:.6g}", t=t)
        if en <= 1.0:
            t = target if land else t + h_try
            y = ys  # the last stage is evaluated at the 5th-order solution (FSAL)
            f = k[6]
            nsteps += 1
            if nsteps > max_steps:
                raise IntegrationError(f"exceeded {max_steps} steps at t={t:.6g}", t=t)
            if en == 0.0:
                factor = _MAX_FACTOR
            else:
                factor = _SAFETY * en ** (-_ALPHA) * err_prev ** _BETA
                factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
            err_prev = max(en, 1e-4)
            h_next = min(h_try * factor, max_step)
            # a step shortened to hit an output time says little about the scale
            h = max(h, h_next) if land else h_next
            h = min(h, max_step)
            while idx < t_out.size and t_out[idx] <= t:
                out[idx] = y
                idx += 1
        else:
            nrej += 1
            h = h_try * max(_MIN_FACTOR, _SAFETY * en ** (-1 / 5))
    return out, {"nsteps": nsteps, "nrejected": nrej, "nfev": nfev, "h": h}


def beat_period(delta, gamma):
    """Averaging period ``2 pi / |delta|``; ``2 pi / gamma`` for a static drive."""
    return 2.0 * math.pi / abs(delta) if delta != 0 else 2.0 * math.pi / gamma


def sample_grid(t_end, period, samples_per_period):
    """Uniform grid of spacing ``period / samples_per_period`` on [0, t_end].

    ``t_end`` itself is always included.
    """
    dt = period / samples_per_period
    n = int(math.floor(t_end / dt + 1e-9))
    grid = dt * np.arange(n + 1)
    if t_end - grid[-1] > 1e-9 * dt:
        grid = np.append(grid, t_end)
    else:
        grid[-1] = t_end
    return grid


def _period_means(t, obs, period, samples):
    """Trapezoidal means over consecutive aligned periods of a uniform grid."""
    nper = (t.size - 1) // samples
    means = []
    for p in range(nper):
        sl = slice(p * samples, (p + 1) * samples + 1)
        means.append(np.trapezoid(obs[sl], t[sl], axis=0) / period)
    return np.array(means)


def detect_transient(t, obs, period, samples, rtol=1e-6):
    """Start time of the first period whose mean matches its predecessor.

    ``obs`` holds observables sampled on a grid with ``samples`` points per
    period, aligned at ``t[0]``.  Returns ``None`` if never reached.
    """
    means = _period_means(t, obs, period, samples)
    for p in range(1, len(means)):
        scale = max(float(np.max(np.abs(means[p]))), 1e-12)
        if float(np.max(np.abs(means[p] - means[p - 1]))) <= rtol * scale:
            return float(t[p * samples])
    return None


# local error target per step relative to the requested tolerance; global errors
# of the contracting systems integrated here then stay at or below ``tol``
LOCAL_FRACTION = 0.01


def integrate_periodic(fun, y0, period, tol, observe, t_end=None,
                       samples_per_period=32, ss_rtol=1e-6, n_avg_periods=2,
                       max_periods=200_000, max_step=np.inf, chunk_periods=8):
    """Integrate a periodically driven system from ``t = 0``.

    With ``t_end`` given, integrate exactly to ``t_end`` and locate the
    transient afterwards.  Without it, integrate period by period until the
    period-averaged observables change by less than ``ss_rtol`` (relative)
    between consecutive periods, then add ``n_avg_periods`` more periods.

    ``tol`` bounds the accumulated error of the samples, so each step is
    held to the stricter local tolerance ``LOCAL_FRACTION * tol``.

    Returns ``(t, y, transient_end, stats)``.
    """
    step_tol = LOCAL_FRACTION * tol
    dt = period / samples_per_period
    max_step = min(max_step, dt)
    y0 = np.asarray(y0, dtype=float)
    if t_end is not None:
        if t_end <= 0:
            raise ValueError("t_end must be positive")
        grid = sample_grid(t_end, period, samples_per_period)
        y, stats = dopri54(fun, 0.0, y0, grid, rtol=step_tol, atol=step_tol,
                           max_step=max_step)
        obs = np.array([observe(row) for row in y])
        marker = detect_transient(grid, obs, period, samples_per_period, ss_rtol)
        return grid, y, marker, stats

    ts = [np.zeros(1)]
    ys = [y0[None, :]]
    means = []
    t_now, y_now, h = 0.0, y0, None
    marker = None
    stats = {"nsteps": 0, "nrejected": 0, "nfev": 0}
    completed = 0
    remaining_after = None
    while True:
        tail_pass = marker is not None
        n_chunk = remaining_after if tail_pass else chunk_periods
        local = t_now + dt * np.arange(1, n_chunk * samples_per_period + 1)
        y_chunk, st = dopri54(fun, t_now, y_now, local, rtol=step_tol, atol=step_tol,
                              max_step=max_step, h0=h)
        for key in ("nsteps", "nrejected", "nfev"):
            stats[key] += st[key]
        h = st["h"]
        full_t = np.concatenate(([t_now], local))
        full_obs = np.array([observe(r) for r in np.vstack((y_now[None, :], y_chunk))])
        for p in range(n_chunk):
            sl = slice(p * samples_per_period, (p + 1) * samples_per_period + 1)
            means.append(np.trapezoid(full_obs[sl], full_t[sl], axis=0) / period)
            completed += 1
            if marker is None and len(means) >= 2:
                scale = max(float(np.max(np.abs(means[-1]))), 1e-12)
                if float(np.max(np.abs(means[-1] - means[-2]))) <= ss_rtol * scale:
                    marker = float(full_t[p * samples_per_period])
                    remaining_after = n_avg_periods - (n_chunk - p - 1)
        ts.append(local)
        ys.append(y_chunk)
        t_now, y_now = float(local[-1]), y_chunk[-1]
        if tail_pass or (marker is not None and remaining_after <= 0):
            break
        if marker is None and completed >= max_periods:
            raise IntegrationError(
                f"no periodic steady state after {completed} periods (t={t_now:.6g})",
                t=t_now)
    t = np.concatenate(ts)
    y = np.vstack(ys)
    stats["h"] = h
    return t, y, marker, stats


def period_average(traj, delta, n_periods=1, values=None):
    """Trapezoidal averages over the last ``n_periods`` beat periods.

    By default averages ``(n1 - n0, n1 + n0)`` and returns ``(mean_diff,
    mean_sum)``; pass ``values`` (array of shape (len(traj), m)) to average
    something else.

    Raises
    ------
    InsufficientSpanError
        If the window reaches back before the transient marker or the start
        of the trajectory.
    """
    gamma = getattr(traj.params, "gamma", 1.0)
    period = beat_period(delta, gamma)
    window = n_periods * period
    t = traj.t
    start = t[-1] - window
    tol = 1e-9 * max(period, 1.0)
    if start < t[0] - tol:
        raise InsufficientSpanError(
            f"trajectory spans {t[-1] - t[0]:.6g}, need {window:.6g} for "
            f"{n_periods} period(s)")
    if traj.transient_end is None and traj.tier != "manual":
        raise InsufficientSpanError("trajectory never reached a periodic steady state")
    if traj.transient_end is not None and start < traj.transient_end - tol:
        raise InsufficientSpanError(
            f"averaging window starts at t={start:.6g}, before the transient "
            f"ends at t={traj.transient_end:.6g}")
    if values is None:
        n1, n0 = traj.populations()
        values = np.column_stack((n1 - n0, n1 + n0))
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    start = max(start, t[0])
    mask = t > start + tol
    t_win = np.concatenate(([start], t[mask]))
    first = np.array([np.interp(start, t, col) for col in values.T])
    v_win = np.vstack((first[None, :], values[mask]))
    means = np.trapezoid(v_win, t_win, axis=0) / (t_win[-1] - t_win[0])
    return tuple(float(m) for m in means)
