"""Closed-form composite-resonance lineshape in the first-harmonic approximation.

Keeping only the DC part and the ``exp(+-i delta t)`` part of the reduced
population model, the time-averaged population difference as a function
of the beat frequency becomes

    I(delta) = bg (1 + A0 L(w0, delta) + A1 L(w1, delta)),
    bg = (n1_eq - n0_eq) (1 - eps**2) / (1 + 2 S - eps**2),

with ``L(w, x) = w**2 / (w**2 + x**2)``.  Both amplitudes are non-negative
for ``S > 0``, so the beat resonances are narrow peaks on a saturated
background.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParameterError, SolverError
from .params import lorentz, saturation_parameter

__all__ = [
    "ResonanceShape",
    "tau_mu_nu",
    "resonance_shape",
    "strong_field_widths",
    "fluorescence_signal",
    "first_harmonic_solve",
    "FirstHarmonic",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResonanceShape:
    """Background plus two Lorentzian components centred at zero beat.

    Widths are half-widths in the units of ``gamma``.
    """

    background: float
    A0: float
    A1: float
    w0: float
    w1: float
    provenance: str = "analytic"
    S: float | None = None

    def __call__(self, delta):
        delta = np.asarray(delta, dtype=float)
        return self.background * (1.0 + self.A0 * lorentz(self.w0, delta)
                                  + self.A1 * lorentz(self.w1, delta))

    def as_dict(self):
        return {"S": self.S, "background": self.background, "A0": self.A0, "A1": self.A1,
                "w0": self.w0, "w1": self.w1, "provenance": self.provenance}


def _S(params, S):
    if S is None:
        return saturation_parameter(params)
    if not (math.isfinite(S) and S >= 0):
        raise ParameterError(f"S must be finite and non-negative, got {S}")
    return float(S)


def _eigenvalues(S, eps):
    lam1 = 1.0 + S + math.hypot(S, eps)
    return lam1, (1.0 + 2.0 * S - eps * eps) / lam1


def tau_mu_nu(params, S=None):
    """Return ``(tau, mu, nu)``; the squared widths are ``tau -+ sqrt(mu**2 + nu)``."""
    S = _S(params, S)
    eps = params.epsilon
    lam1, lam0 = _eigenvalues(S, eps)
    root = math.hypot(S, eps)
    c = S * S * (1 + 2 * S) / (1 + 2 * S - eps * eps)
    tau = 0.5 * (lam1 * lam1 + lam0 * lam0) - c
    mu = 0.5 * (lam1 * lam1 - lam0 * lam0) - c
    if S == 0:
        nu = 0.0
    else:
        nu = 4 * S * S * (1 + S) * eps * eps / ((root + S) * (root + 1 + S))
    return tau, mu, nu


def resonance_shape(params, S=None):
    """Amplitudes and widths of the two beat resonances.

    Parameters
    ----------
    params : SystemParams
        Equal Rabi frequencies are required unless ``S`` is given.
    S : float, optional
        Saturation parameter; computed from ``params`` when omitted.

    Returns
    -------
    ResonanceShape
        ``w0 <= w1`` in units of ``gamma``.

    Raises
    ------
    DomainError
        If ``w0**2`` comes out non-positive.
    """
    S = _S(params, S)
    eps = params.epsilon
    g = params.gamma
    det = 1 + 2 * S - eps * eps
    bg = params.dn_eq * (1 - eps * eps) / det
    tau, mu, nu = tau_mu_nu(params, S)
    q = math.sqrt(mu * mu + nu)
    if S == 0:
        # undriven: no beat structure; widths are the bare relaxation rates
        w0s, w1s = (1 - abs(eps)) ** 2, (1 + abs(eps)) ** 2
        return ResonanceShape(bg, 0.0, 0.0, g * math.sqrt(w0s), g * math.sqrt(w1s), "analytic", S)
    lam0 = _eigenvalues(S, eps)[1]
    w1s = tau + q
    # tau - q suffers cancellation for S >> 1; use (tau - q)(tau + q) = tau^2 - mu^2 - nu
    w0s = (lam0 * lam0 * (tau + mu) - nu) / w1s
    if not w0s > 0:
        raise DomainError(f"non-positive w0^2 = {w0s:.3g} (tau={tau:.6g}, mu={mu:.6g}, nu={nu:.6g})")
    ratio = (1 + 2 * S) / det
    A0 = S * S / q * (1.0 / w0s - ratio)
    A1 = -S * S / q * (1.0 / w1s - ratio)
    return ResonanceShape(bg, A0, A1, g * math.sqrt(w0s), g * math.sqrt(w1s), "analytic", S)


def strong_field_widths(params, S=None):
    """Large-``S`` widths ``(gamma lambda0, gamma sqrt(lambda1**2 - 2 S**2))``."""
    S = _S(params, S)
    if S < 1:
        warnings.warn(f"strong-field widths used at S={S:.3g} < 1", UserWarning, stacklevel=2)
    lam1, lam0 = _eigenvalues(S, params.epsilon)
    arg = lam1 * lam1 - 2 * S * S
    if arg <= 0:
        raise DomainError(f"lambda1^2 - 2 S^2 = {arg:.3g} is not positive")
    return params.gamma * lam0, params.gamma * math.sqrt(arg)


def fluorescence_signal(delta, params, S=None):
    """Time-averaged population difference at beat frequency ``delta``.

    Accepts a scalar or an array of ``delta``.  The proportionality
    constant between signal and population difference is fixed to one.
    """
    return resonance_shape(params, S)(delta) if np.ndim(delta) else float(
        resonance_shape(params, S)(delta))


@dataclass(frozen=True)
class FirstHarmonic:
    """``n_i(t) = alpha_i + beta_i cos(delta t + phi_i)``."""

    alpha1: float
    alpha0: float
    beta1: float
    beta0: float
    phi1: float
    phi0: float

    def __iter__(self):
        return iter((self.alpha1, self.alpha0, self.beta1, self.beta0, self.phi1, self.phi0))

    @property
    def mean_diff(self):
        return self.alpha1 - self.alpha0


def first_harmonic_solve(params, delta, S=None):
    """Balance the DC and first-harmonic parts of the reduced model.

    Write ``n_i = alpha_i + Re(c_i exp(i delta t))`` with
    ``c_i = a_i + i b_i`` and ``D = n1 - n0``.  In units of ``gamma t``
    with ``w = delta/gamma``, dropping second harmonics of
    ``S (1 + cos delta t) D`` gives six real equations::

        0           = -r_i (alpha_i - n_i_eq) -+ S (dA + da/2)
        -w b_i      = -r_i a_i                -+ S (da + dA)
         w a_i      = -r_i b_i                -+ S  db

    where ``r = (1+eps, 1-eps)``, ``dA = alpha1 - alpha0``,
    ``da = a1 - a0``, ``db = b1 - b0`` and the upper sign belongs to
    ``n1``.  Then ``beta_i = |c_i|`` and ``phi_i = arg c_i``.

    Raises
    ------
    SolverError
        If the 6x6 system is singular.
    """
    S = _S(params, S)
    eps = params.epsilon
    w = float(delta) / params.gamma
    r = (1 + eps, 1 - eps)
    # unknown order: alpha1, alpha0, a1, a0, b1, b0
    A = np.zeros((6, 6))
    rhs = np.zeros(6)
    for i, sgn in ((0, 1.0), (1, -1.0)):
        a_, b_ = 2 + i, 4 + i
        # DC row
        A[i, i] += r[i]
        A[i, 0] += sgn * S
        A[i, 1] -= sgn * S
        A[i, 2] += sgn * 0.5 * S
        A[i, 3] -= sgn * 0.5 * S
        rhs[i] = r[i] * (params.n1_eq, params.n0_eq)[i]
        # cosine row: r_i a_i - w b_i + sgn S (da + dA) = 0
        A[a_, a_] += r[i]
        A[a_, b_] -= w
        A[a_, 2] += sgn * S
        A[a_, 3] -= sgn * S
        A[a_, 0] += sgn * S
        A[a_, 1] -= sgn * S
        # sine row: r_i b_i + w a_i + sgn S db = 0
        A[b_, b_] += r[i]
        A[b_, a_] += w
        A[b_, 4] += sgn * S
        A[b_, 5] -= sgn * S
    try:
        x = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError:
        raise SolverError("first-harmonic balance is singular",
                          condition=float(np.linalg.cond(A))) from None
    c1, c0 = complex(x[2], x[4]), complex(x[3], x[5])
    return FirstHarmonic(float(x[0]), float(x[1]), abs(c1), abs(c0),
                         math.atan2(c1.imag, c1.real), math.atan2(c0.imag, c0.real))
