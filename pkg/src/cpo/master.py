"""Rotating-frame master equation of the bichromatically driven two-level system.

Populations relax to equilibrium at ``gamma*(1 +/- epsilon)`` and the
coherence decays at ``Gamma``.  In the frame rotating with ``omega1`` the
second field appears with the phase factor ``exp(i delta t)``.  Only
``rho10`` is stored; ``rho01`` is its conjugate by construction.
"""
from __future__ import annotations

import cmath
import csv
import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, UnsupportedConfigurationError
from .integrate import Trajectory, beat_period, integrate_periodic, period_average
from .params import relaxation_rates

__all__ = [
    "DensityState",
    "DensityRate",
    "equilibrium_state",
    "derivative",
    "full_rhs",
    "trace_flux",
    "integrate_full",
    "full_steady_state",
    "trajectory_states",
    "write_full_csv",
    "MAX_STIFFNESS",
]

logger = logging.getLogger(__name__)

COLUMNS = ("rho11", "rho00", "re_rho10", "im_rho10")
# explicit integration is only declared reliable up to this Gamma/gamma
MAX_STIFFNESS = 1e4


@dataclass(frozen=True)
class DensityState:
    """Hermitian 2x2 density matrix; ``rho01`` is ``conj(rho10)``."""

    rho11: float
    rho00: float
    rho10: complex = 0j

    @property
    def rho01(self):
        return self.rho10.conjugate()

    @property
    def trace(self):
        return self.rho11 + self.rho00

    def matrix(self):
        return np.array([[self.rho11, self.rho10], [self.rho01, self.rho00]], dtype=complex)

    def as_vector(self):
        return np.array([self.rho11, self.rho00, self.rho10.real, self.rho10.imag])

    @classmethod
    def from_vector(cls, v):
        return cls(float(v[0]), float(v[1]), complex(v[2], v[3]))

    def check_physical(self, atol=1e-12):
        """Raise ParameterError unless this is a valid (positive) initial state."""
        for name in ("rho11", "rho00"):
            v = getattr(self, name)
            if not -atol <= v <= 1 + atol:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.rho10) ** 2 > self.rho11 * self.rho00 + atol:
            raise ParameterError(
                f"state is not positive: |rho10|^2={abs(self.rho10) ** 2:.3g} > "
                f"rho11*rho00={self.rho11 * self.rho00:.3g}")


@dataclass(frozen=True)
class DensityRate:
    """Time derivative of a :class:`DensityState`.

    ``rho01`` is evaluated from its own equation of motion, so
    ``conj(rho10) == rho01`` is a genuine consistency check.
    """

    rho11: float
    rho00: float
    rho10: complex
    rho01: complex


def equilibrium_state(params):
    return DensityState(params.n1_eq, params.n0_eq, 0j)


def _field(params, t):
    # coefficient multiplying (rho11 - rho00) in the rho10 equation
    return params.Omega1 + params.Omega2 * cmath.exp(1j * params.delta * t)


def derivative(t, state, params):
    """Right-hand side of the master equation at time ``t``."""
    g1, g0 = relaxation_rates(params)
    w = params.detuning
    G = params.Gamma_coh
    v = _field(params, t)
    vc = v.conjugate()
    r10 = state.rho10
    r01 = state.rho01
    inv = state.rho11 - state.rho00
    d11 = -g1 * (state.rho11 - params.n1_eq) + 0.5j * vc * r10 - 0.5j * v * r01
    d00 = -g0 * (state.rho00 - params.n0_eq) - 0.5j * vc * r10 + 0.5j * v * r01
    d10 = -(G - 1j * w) * r10 + 0.5j * v * inv
    d01 = -(G + 1j * w) * r01 - 0.5j * vc * inv
    return DensityRate(d11.real, d00.real, d10, d01)


def full_rhs(params):
    """Real-vector right-hand side ``f(t, y)`` with ``y = [rho11, rho00, Re rho10, Im rho10]``."""
    g1, g0 = relaxation_rates(params)
    w = params.detuning
    G = params.Gamma_coh
    O1, O2, d = params.Omega1, params.Omega2, params.delta
    n1e, n0e = params.n1_eq, params.n0_eq
    decay = complex(-G, w)

    def f(t, y):
        r11, r00 = y[0], y[1]
        r10 = complex(y[2], y[3])
        v = O1 + O2 * cmath.exp(1j * d * t)
        # i/2 conj(v) rho10 - i/2 v conj(rho10) = -Im(conj(v) rho10)
        pump = (v.conjugate() * r10).imag
        d10 = decay * r10 + 0.5j * v * (r11 - r00)
        return np.array((
            -g1 * (r11 - n1e) - pump,
            -g0 * (r00 - n0e) + pump,
            d10.real,
            d10.imag,
        ))

    return f


def trace_flux(state, params):
    """Probability flow ``d(rho11 + rho00)/dt`` exchanged with the reservoir."""
    g = params.gamma
    e = params.epsilon
    return -g * ((1 + e) * (state.rho11 - params.n1_eq) + (1 - e) * (state.rho00 - params.n0_eq))


def _observe(y):
    return np.array((y[0] - y[1], y[0] + y[1]))


def _check_stiffness(params):
    ratio = params.Gamma_coh / params.gamma
    if ratio > MAX_STIFFNESS:
        raise UnsupportedConfigurationError(
            f"Gamma/gamma = {ratio:.3g} exceeds the supported {MAX_STIFFNESS:.0e} "
            "for explicit integration of the full master equation")


def _log_positivity(traj):
    r11, r00 = traj.column("rho11"), traj.column("rho00")
    coh2 = traj.column("re_rho10") ** 2 + traj.column("im_rho10") ** 2
    bad = np.count_nonzero(coh2 > r11 * r00 + 1e-12)
    if bad:
        logger.warning("density matrix lost positivity at %d of %d samples", bad, len(traj))


def integrate_full(params, initial=None, t_end=None, tol=1e-8, samples_per_period=32,
                   n_avg_periods=2, ss_rtol=1e-6):
    """Integrate the master equation from ``t = 0``.

    Samples are spaced uniformly, ``samples_per_period`` per beat period.
    With ``t_end=None`` the run continues until the period-averaged
    populations settle (relative change below ``ss_rtol``) and then
    ``n_avg_periods`` further periods are appended.

    Returns
    -------
    Trajectory
        Columns ``rho11, rho00, re_rho10, im_rho10``; ``transient_end`` marks
        the detected onset of the periodic regime.
    """
    _check_stiffness(params)
    if initial is None:
        initial = equilibrium_state(params)
    initial.check_physical()
    if tol <= 0:
        raise ParameterError("tol must be positive")
    period = beat_period(params.delta, params.gamma)
    t, y, marker, stats = integrate_periodic(
        full_rhs(params), initial.as_vector(), period, tol, _observe, t_end=t_end,
        samples_per_period=samples_per_period, ss_rtol=ss_rtol,
        n_avg_periods=n_avg_periods)
    traj = Trajectory(
        t, y, COLUMNS, "full", params=params,
        settings={"tol": tol, "samples_per_period": samples_per_period, **stats},
        transient_end=marker)
    _log_positivity(traj)
    return traj


def full_steady_state(params, tol=1e-8, n_periods=2, **kwargs):
    """Period-averaged ``(n1 - n0, n1 + n0)`` in the periodic steady state."""
    traj = integrate_full(params, tol=tol, n_avg_periods=n_periods, **kwargs)
    return period_average(traj, params.delta, n_periods)


def trajectory_states(traj):
    """Iterate ``(t, DensityState)`` pairs of a full-tier trajectory."""
    for t, row in zip(traj.t, traj.y):
        yield float(t), DensityState.from_vector(row)


def write_full_csv(traj, path):
    """CSV with columns t, rho11, rho00, Re(rho10), Im(rho10), trace, trace_flux."""
    params = traj.params
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "rho11", "rho00", "Re(rho10)", "Im(rho10)", "trace", "trace_flux"])
        for t, st in trajectory_states(traj):
            w.writerow([repr(v) for v in (
                t, st.rho11, st.rho00, st.rho10.real, st.rho10.imag, st.trace,
                trace_flux(st, params))])


def warn_if_nonadiabatic(params, category=UserWarning):
    """Advisory for tiers that eliminate the coherence adiabatically."""
    G = params.Gamma_coh
    if abs(params.delta) > G / 3 or max(abs(params.Omega1), abs(params.Omega2)) > G:
        warnings.warn(
            f"adiabatic elimination questionable: delta={params.delta:.3g}, "
            f"Omega={max(params.Omega1, params.Omega2):.3g}, Gamma={G:.3g}",
            category, stacklevel=3)
