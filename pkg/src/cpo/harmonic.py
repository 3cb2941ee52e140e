"""Periodic steady state from a truncated Fourier (harmonic-balance) expansion.

After eliminating the coherences the populations obey, for every harmonic
``k`` of the beat frequency ``delta``,

    i k delta/gamma n1(k) = -(1+eps) (n1(k) - n1_eq [k=0]) - F(k)/2
    i k delta/gamma n0(k) = -(1-eps) (n0(k) - n0_eq [k=0]) + F(k)/2

with ``F(k) = K(k) D(k) + (L+M)/2 D(k+1) + (L-M)/2 D(k-1)`` and
``D = n1 - n0``.  Harmonics beyond ``|k| = N`` are set to zero.  The
unknowns are interleaved as ``[n1(-N), n0(-N), n1(-N+1), ...]`` so each
row couples only to neighbours within three columns; the system is solved
as a banded matrix.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, ParameterError, SolverError

__all__ = [
    "HarmonicSolution",
    "kernels",
    "assemble",
    "solve_harmonic_balance",
    "coherence_harmonics",
    "coherence_harmonics_conj",
    "auto_truncation",
    "harmonic_steady_state",
]

logger = logging.getLogger(__name__)

_RESIDUAL_TOL = 1e-10
_REALITY_TOL = 1e-9
_BAND = 3


@dataclass(frozen=True)
class HarmonicSolution:
    """Fourier coefficients ``n1(k)``, ``n0(k)`` for ``k = -N..N``.

    Attributes
    ----------
    N : int
        Truncation order.
    coeffs_n1, coeffs_n0 : ndarray of complex, shape (2N+1,)
        Coefficient of ``exp(i k delta t)``; entry ``j`` holds ``k = j - N``.
    params : SystemParams
        Parameters the solution was computed for.
    residual : float
        Relative residual of the assembled linear system.
    """

    N: int
    coeffs_n1: np.ndarray
    coeffs_n0: np.ndarray
    params: object
    residual: float = 0.0

    @property
    def k(self):
        return np.arange(-self.N, self.N + 1)

    def n1(self, k):
        return self.coeffs_n1[k + self.N] if abs(k) <= self.N else 0j

    def n0(self, k):
        return self.coeffs_n0[k + self.N] if abs(k) <= self.N else 0j

    def diff(self, k):
        return self.n1(k) - self.n0(k)

    @property
    def mean_diff(self):
        """Time-averaged population difference ``n1(0) - n0(0)``."""
        return float(self.diff(0).real)

    @property
    def mean_sum(self):
        return float((self.n1(0) + self.n0(0)).real)

    def reality_error(self):
        """Largest violation of ``n(-k) = conj(n(k))``."""
        return max(
            float(np.max(np.abs(c - np.conj(c[::-1]))))
            for c in (self.coeffs_n1, self.coeffs_n0)
        )

    def reconstruct(self, t):
        """Time-domain populations ``(n1(t), n0(t))`` from the harmonics."""
        t = np.asarray(t, dtype=float)
        phase = np.exp(1j * self.params.delta * np.multiply.outer(t, self.k))
        return (phase @ self.coeffs_n1).real, (phase @ self.coeffs_n0).real

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k", "Re(n1)", "Im(n1)", "Re(n0)", "Im(n0)"])
            for k, a, b in zip(self.k, self.coeffs_n1, self.coeffs_n0):
                w.writerow([int(k), *(repr(float(v)) for v in (a.real, a.imag, b.real, b.imag))])


def kernels(k, params):
    """Couplings ``(K, L, M)`` of harmonic ``k`` to the population differences.

    With ``x = Gamma + i k delta`` and ``D_j = x**2 + (omega_j - omega0)**2``::

        K = Omega1**2/gamma x/D_1 + Omega2**2/gamma x/D_2
        L = Omega1 Omega2/gamma (x/D_1 + x/D_2)
        M = i Omega1 Omega2/gamma (-(omega1-omega0)/D_1 + (omega2-omega0)/D_2)

    These are exact for unequal Rabi frequencies as well.
    """
    p = params
    x = p.Gamma_coh + 1j * k * p.delta
    a1 = p.omega1 - p.omega0
    a2 = p.omega2 - p.omega0
    D1 = x * x + a1 * a1
    D2 = x * x + a2 * a2
    g = p.gamma
    K = p.Omega1**2 / g * x / D1 + p.Omega2**2 / g * x / D2
    cross = p.Omega1 * p.Omega2 / g
    L = cross * (x / D1 + x / D2)
    M = 1j * cross * (-a1 / D1 + a2 / D2)
    return complex(K), complex(L), complex(M)


def assemble(params, N):
    """Dense matrix ``A`` and source ``b`` of the truncated system (interleaved layout)."""
    ab, b = _assemble_banded(params, N)
    dim = b.size
    A = np.zeros((dim, dim), dtype=complex)
    for d in range(-_BAND, _BAND + 1):
        diag = ab[_BAND - d, max(d, 0):dim + min(d, 0)]
        A += np.diag(diag, d)
    return A, b


def _assemble_banded(params, N):
    dim = 2 * (2 * N + 1)
    ab = np.zeros((2 * _BAND + 1, dim), dtype=complex)
    b = np.zeros(dim, dtype=complex)
    rates = (1.0 + params.epsilon, 1.0 - params.epsilon)
    eq = (params.n1_eq, params.n0_eq)
    w = params.delta / params.gamma

    def put(row, col, value):
        ab[_BAND + row - col, col] += value

    for k in range(-N, N + 1):
        K, L, M = kernels(k, params)
        couplings = ((k, K), (k + 1, 0.5 * (L + M)), (k - 1, 0.5 * (L - M)))
        for i, sgn in ((0, 1.0), (1, -1.0)):
            row = 2 * (k + N) + i
            put(row, row, 1j * k * w + rates[i])
            if k == 0:
                b[row] = rates[i] * eq[i]
            for kk, c in couplings:
                if -N <= kk <= N:
                    col = 2 * (kk + N)
                    put(row, col, 0.5 * sgn * c)
                    put(row, col + 1, -0.5 * sgn * c)
    return ab, b


def _banded_matvec(ab, x):
    dim = x.size
    y = np.zeros(dim, dtype=complex)
    for d in range(-_BAND, _BAND + 1):
        diag = ab[_BAND - d, max(d, 0):dim + min(d, 0)]
        if d >= 0:
            y[:dim - d] += diag * x[d:]
        else:
            y[-d:] += diag * x[:dim + d]
    return y


def _condition(params, N):
    try:
        A, _ = assemble(params, N)
        return float(np.linalg.cond(A))
    except (np.linalg.LinAlgError, MemoryError):
        return math.inf


def solve_harmonic_balance(params, N):
    """Solve the truncated harmonic-balance system.

    Parameters
    ----------
    params : SystemParams
    N : int
        Truncation order, at least 1.

    Returns
    -------
    HarmonicSolution

    Raises
    ------
    SolverError
        If the system is singular, the residual exceeds ``1e-10`` relative,
        or the solution violates the reality symmetry.
    """
    if int(N) != N or N < 1:
        raise ParameterError(f"truncation order must be an integer >= 1, got {N}")
    N = int(N)
    ab, b = _assemble_banded(params, N)
    try:
        with np.errstate(all="raise"):
            x = linalg.solve_banded((_BAND, _BAND), ab, b, check_finite=True)
    except (linalg.LinAlgError, FloatingPointError, ValueError) as exc:
        cond = _condition(params, N)
        raise SolverError(f"harmonic-balance system is singular (cond ~ {cond:.3g}): {exc}",
                          condition=cond) from None
    residual = float(np.linalg.norm(_banded_matvec(ab, x) - b) / max(np.linalg.norm(b), 1e-300))
    if not np.all(np.isfinite(x)) or residual > _RESIDUAL_TOL:
        cond = _condition(params, N)
        raise SolverError(f"harmonic-balance residual {residual:.3g} (cond ~ {cond:.3g})",
                          condition=cond)
    sol = HarmonicSolution(N, x[0::2].copy(), x[1::2].copy(), params, residual)
    err = sol.reality_error()
    if err > _REALITY_TOL:
        raise SolverError(f"solution violates reality symmetry by {err:.3g}")
    return sol


def coherence_harmonics(sol, params=None):
    """Coherence harmonics ``rho10(k)``, ``k = -N..N``, implied by the populations."""
    p = sol.params if params is None else params
    k = sol.k
    D = sol.coeffs_n1 - sol.coeffs_n0
    D_lo = np.concatenate(([0j], D[:-1]))  # D(k-1)
    return 0.5j * (p.Omega1 * D + p.Omega2 * D_lo) / (p.Gamma_coh - 1j * p.detuning + 1j * k * p.delta)


def coherence_harmonics_conj(sol, params=None):
    """Harmonics ``rho01(k)`` from their own equation; equal to ``conj(rho10(-k))``."""
    p = sol.params if params is None else params
    k = sol.k
    D = sol.coeffs_n1 - sol.coeffs_n0
    D_hi = np.concatenate((D[1:], [0j]))  # D(k+1)
    return -0.5j * (p.Omega1 * D + p.Omega2 * D_hi) / (p.Gamma_coh + 1j * p.detuning + 1j * k * p.delta)


def _converged(a, b, rel_tol):
    for x, y in ((a.mean_diff, b.mean_diff), (abs(a.n1(1)), abs(b.n1(1)))):
        scale = max(abs(x), abs(y))
        if scale > 1e-300 and abs(x - y) > rel_tol * scale:
            return False
    return True


def auto_truncation(params, rel_tol=1e-8):
    """Smallest ``N`` whose result is stable under doubling ``N``.

    Stability means both ``n1(0) - n0(0)`` and ``|n1(1)|`` change by less
    than ``rel_tol`` relative.  ``N`` is capped at ``ceil(10 Gamma/|delta|)``,
    with ``gamma`` standing in for a zero ``delta``.

    Raises
    ------
    ConvergenceError
        If the cap is reached first.
    """
    if rel_tol <= 0:
        raise ParameterError("rel_tol must be positive")
    # at delta = 0 the harmonics are still the slow-beat limit; bound N by Gamma/gamma
    beat = abs(params.delta) if params.delta != 0 else params.gamma
    cap = max(1, math.ceil(10 * params.Gamma_coh / beat))
    cache = {}

    def solve(n):
        if n not in cache:
            cache[n] = solve_harmonic_balance(params, n)
        return cache[n]

    def stable(n):
        return _converged(solve(n), solve(2 * n), rel_tol)

    hi = 1
    while not stable(hi):
        if hi >= cap:
            raise ConvergenceError(
                f"harmonic balance not converged to {rel_tol:g} at the cap N={cap}")
        hi = min(2 * hi, cap)
    lo = hi // 2  # known unstable (or 0)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if stable(mid):
            hi = mid
        else:
            lo = mid
    logger.debug("auto_truncation chose N=%d", hi)
    return hi


def harmonic_steady_state(params, N=None, rel_tol=1e-8):
    """Solve at ``N`` (or the automatically chosen order) and return the solution."""
    if N is None:
        N = auto_truncation(params, rel_tol)
    return solve_harmonic_balance(params, N)
