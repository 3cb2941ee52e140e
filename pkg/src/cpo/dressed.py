"""Adiabatic population model and its dressed-state (eigenframe) form.

With the coherences eliminated the populations obey, in units of ``gamma t``,

    dn/dt = -(L0 + L1(t)) n + n_src

where ``L0`` is constant and ``L1(t) = S cos(delta t) [[1, -1], [-1, 1]]``.
Rotating the deviation ``n - n_bar`` into the eigenbasis of ``L0`` gives
the dressed coordinates ``eta1`` (fast, rate ``lambda1``) and ``eta0``
(slow, rate ``lambda0``), which are coupled only through ``L1(t)``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFrameError, ParameterError
from .integrate import Trajectory, beat_period, integrate_periodic, period_average
from .master import warn_if_nonadiabatic
from .params import saturation_parameter

__all__ = [
    "PopulationState",
    "DressedFrame",
    "reduced_rhs",
    "integrate_reduced",
    "reduced_steady_state",
    "liouvillian_parts",
    "stationary_solution",
    "eigen_frame",
    "dressed_coordinates",
    "dressed_derivative",
    "integrate_dressed",
    "dressed_populations",
    "limit_coordinates",
    "strong_field_derivative",
    "write_dressed_csv",
]

logger = logging.getLogger(__name__)

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class PopulationState:
    n1: float
    n0: float

    def check_physical(self):
        for name in ("n1", "n0"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")

    def as_vector(self):
        return np.array([self.n1, self.n0], dtype=float)


@dataclass(frozen=True)
class DressedFrame:
    """Eigen-decomposition of ``L0`` together with the stationary point.

    Attributes
    ----------
    lambda1, lambda0 : float
        Eigenvalues of ``L0``, ``lambda0 <= lambda1``.
    theta : float
        Mixing angle in ``[0, pi/2]``.
    n_bar : ndarray
        Stationary populations ``(n1, n0)`` of the undriven-beat problem.
    eta_bar : ndarray
        The same point in dressed coordinates.
    S, epsilon : float
        Parameters the frame was built from.
    degenerate_mixing : bool
        True when ``S = 0`` and ``theta`` was fixed by continuity.
    """

    lambda1: float
    lambda0: float
    theta: float
    n_bar: np.ndarray
    eta_bar: np.ndarray
    S: float
    epsilon: float
    degenerate_mixing: bool = False

    @property
    def rotation(self):
        """``U_R``; its columns are the eigenvectors for ``lambda1`` and ``lambda0``."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, s], [-s, c]])

    @property
    def eigenvalues(self):
        return np.array([self.lambda1, self.lambda0])


def _resolve_S(params, S):
    if S is None:
        return saturation_parameter(params)
    if not (math.isfinite(S) and S >= 0):
        raise ParameterError(f"S must be finite and non-negative, got {S}")
    return float(S)


def liouvillian_parts(params, t, S=None):
    """Return ``(L0, L1(t), n_src)`` of the reduced population model."""
    S = _resolve_S(params, S)
    e = params.epsilon
    L0 = np.array([[1 + S + e, -S], [-S, 1 + S - e]])
    L1 = S * math.cos(params.delta * t) * np.array([[1.0, -1.0], [-1.0, 1.0]])
    src = np.array([(1 + e) * params.n1_eq, (1 - e) * params.n0_eq])
    return L0, L1, src


def reduced_rhs(params, S=None):
    """Right-hand side ``f(t, n)`` of the reduced model in absolute time."""
    S = _resolve_S(params, S)
    g, e, d = params.gamma, params.epsilon, params.delta
    r1, r0 = 1 + e, 1 - e
    n1e, n0e = params.n1_eq, params.n0_eq

    def f(t, y):
        pump = S * (1.0 + math.cos(d * t)) * (y[0] - y[1])
        return np.array((g * (-r1 * (y[0] - n1e) - pump), g * (-r0 * (y[1] - n0e) + pump)))

    return f


def _observe(y):
    return np.array((y[0] - y[1], y[0] + y[1]))


def _log_range(traj):
    y = traj.y
    bad = np.count_nonzero((y < -1e-12) | (y > 1 + 1e-12))
    if bad:
        logger.warning("populations left [0, 1] at %d samples", bad)


def integrate_reduced(params, initial=None, t_end=None, tol=1e-8, S=None,
                      samples_per_period=32, n_avg_periods=2, ss_rtol=1e-6):
    """Integrate the reduced two-population model.

    Mirrors :func:`cpo.master.integrate_full`; ``S`` defaults to the
    saturation parameter of ``params``.  Emits a ``UserWarning`` when the
    adiabatic elimination behind the model is questionable.
    """
    warn_if_nonadiabatic(params)
    S = _resolve_S(params, S)
    if initial is None:
        initial = PopulationState(params.n1_eq, params.n0_eq)
    initial.check_physical()
    if tol <= 0:
        raise ParameterError("tol must be positive")
    period = beat_period(params.delta, params.gamma)
    t, y, marker, stats = integrate_periodic(
        reduced_rhs(params, S), initial.as_vector(), period, tol, _observe, t_end=t_end,
        samples_per_period=samples_per_period, ss_rtol=ss_rtol, n_avg_periods=n_avg_periods)
    traj = Trajectory(t, y, ("n1", "n0"), "reduced", params=params,
                      settings={"tol": tol, "S": S, **stats}, transient_end=marker)
    _log_range(traj)
    return traj


def reduced_steady_state(params, tol=1e-8, n_periods=2, S=None):
    """Period-averaged ``(n1 - n0, n1 + n0)`` of the reduced model."""
    traj = integrate_reduced(params, tol=tol, S=S, n_avg_periods=n_periods)
    return period_average(traj, params.delta, n_periods)


def _stationary(params, S):
    e = params.epsilon
    det = 1 + 2 * S - e * e
    dn = params.dn_eq
    return params.n1_eq - S * (1 - e) / det * dn, params.n0_eq + S * (1 + e) / det * dn


def stationary_solution(params, S=None):
    """Fixed point of the beat-free problem, ``L0 n_bar = n_src``."""
    S = _resolve_S(params, S)
    n_bar = PopulationState(*_stationary(params, S))
    L0, _, src = liouvillian_parts(params, 0.0, S)
    res = np.max(np.abs(L0 @ n_bar.as_vector() - src))
    if res > 1e-12 * max(1.0, np.max(np.abs(L0))):
        logger.warning("stationary solution residual %.3g", res)
    return n_bar


def eigen_frame(params, S=None):
    """Diagonalise ``L0`` and return the :class:`DressedFrame`.

    Raises
    ------
    DegenerateFrameError
        If ``S = 0`` and ``epsilon = 0``, where ``L0`` is the identity.
    """
    S = _resolve_S(params, S)
    e = params.epsilon
    root = math.hypot(S, e)
    lam1 = 1 + S + root
    # the product form avoids cancellation in 1 + S - root; lambda0 <= 1 exactly
    # because root >= S, so clip the rounding excess
    lam0 = min((1 + 2 * S - e * e) / lam1, 1.0)
    degenerate = False
    if S == 0:
        if e == 0:
            raise DegenerateFrameError("S = 0 and epsilon = 0: eigenbasis of L0 is arbitrary")
        theta = 0.0 if e > 0 else math.pi / 2
        degenerate = True
        logger.info("S = 0: mixing angle fixed by continuity at %.3g", theta)
    else:
        r = e / S
        tan_theta = 1.0 / (math.hypot(1.0, r) + r) if r > 0 else math.hypot(1.0, r) - r
        theta = math.atan(tan_theta)
    n_bar = np.array(_stationary(params, S))
    c, s = math.cos(theta), math.sin(theta)
    U = np.array([[c, s], [-s, c]])
    return DressedFrame(lam1, lam0, theta, n_bar, U.T @ n_bar, S, e, degenerate)


def dressed_coordinates(n, frame):
    """``(eta1, eta0)`` of populations ``n`` (a PopulationState or 2-vector)."""
    v = n.as_vector() if isinstance(n, PopulationState) else np.asarray(n, dtype=float)
    eta = frame.rotation.T @ (v - frame.n_bar)
    return float(eta[0]), float(eta[1])


def _coupling_matrix(frame):
    # U_R^T [[1,-1],[-1,1]] U_R, normalised by S
    S, e = frame.S, frame.epsilon
    root = math.hypot(S, e)
    if root == 0:
        return np.zeros((2, 2))
    return np.array([[root + S, -e], [-e, root - S]]) / root


def dressed_derivative(eta, t, params, frame=None, drive=True):
    """``d eta/dt`` in the dressed frame (absolute time).

    ``drive=False`` drops the beat coupling, leaving free decay at
    ``gamma lambda_k``.
    """
    if frame is None:
        frame = eigen_frame(params)
    eta = np.asarray(eta, dtype=float)
    rate = -frame.eigenvalues * eta
    if drive:
        c = frame.S * math.cos(params.delta * t)
        rate = rate - c * (_coupling_matrix(frame) @ (eta + frame.eta_bar))
    return params.gamma * rate


def integrate_dressed(params, initial_eta=None, t_end=None, tol=1e-8, S=None, drive=True,
                      samples_per_period=32, n_avg_periods=2, ss_rtol=1e-6):
    """Integrate the dressed-frame equations.

    ``initial_eta`` defaults to the coordinates of the equilibrium
    populations.  The returned trajectory has columns ``eta1, eta0``; use
    :func:`dressed_populations` to rotate back.
    """
    frame = eigen_frame(params, S)
    if initial_eta is None:
        initial_eta = dressed_coordinates(np.array([params.n1_eq, params.n0_eq]), frame)
    y0 = np.asarray(initial_eta, dtype=float)
    if y0.shape != (2,):
        raise ParameterError("initial_eta must be a 2-vector")
    if tol <= 0:
        raise ParameterError("tol must be positive")
    lam = frame.eigenvalues
    M = _coupling_matrix(frame) * frame.S
    eb = frame.eta_bar
    g, d = params.gamma, params.delta

    def f(t, y):
        r = -lam * y
        if drive:
            r = r - math.cos(d * t) * (M @ (y + eb))
        return g * r

    period = beat_period(d, g)
    t, y, marker, stats = integrate_periodic(
        f, y0, period, tol, lambda v: v.copy(), t_end=t_end,
        samples_per_period=samples_per_period, ss_rtol=ss_rtol, n_avg_periods=n_avg_periods)
    settings = {"tol": tol, "S": frame.S, "drive": drive, "frame": frame, **stats}
    return Trajectory(t, y, ("eta1", "eta0"), "dressed", params=params,
                      settings=settings, transient_end=marker)


def dressed_populations(traj):
    """Bare populations ``(n1, n0)`` of a dressed trajectory."""
    frame = traj.settings["frame"]
    n = traj.y @ frame.rotation.T + frame.n_bar
    return n[:, 0], n[:, 1]


def write_dressed_csv(traj, path):
    """CSV with columns t, eta1, eta0, n1, n0."""
    n1, n0 = dressed_populations(traj)
    traj.to_csv(path, extra={"n1": n1, "n0": n0})


def limit_coordinates(n, params):
    """Strong-field dressed coordinates.

    ``eta1 = (n1 - n0)/sqrt(2)`` and
    ``eta0 = (n1 + n0 - (n1_eq + n0_eq) - eps (n1_eq - n0_eq))/sqrt(2)``,
    the ``S -> infinity`` limit of :func:`dressed_coordinates`.
    """
    v = n.as_vector() if isinstance(n, PopulationState) else np.asarray(n, dtype=float)
    sum_eq = params.n1_eq + params.n0_eq
    return ((v[0] - v[1]) / _SQRT2,
            (v[0] + v[1] - sum_eq - params.epsilon * params.dn_eq) / _SQRT2)


def strong_field_derivative(eta, t, params, S=None):
    """Strong-field limit of the dressed equations (absolute time).

    In the limit coordinates these equations are an exact rewriting of the
    reduced model; relative to the finite-``S`` frame they differ at
    order ``1/S``.
    """
    S = _resolve_S(params, S)
    e = params.epsilon
    eta1, eta0 = float(eta[0]), float(eta[1])
    c = math.cos(params.delta * t)
    d1 = -(1 + 2 * S) * eta1 - e * eta0 - 2 * S * c * eta1 + (1 - e * e) / _SQRT2 * params.dn_eq
    d0 = -eta0 - e * eta1
    return params.gamma * np.array([d1, d0])
