"""Least-squares fitting of composite Lorentzian resonances.

The model is a sum of Lorentzians sharing one centre on top of a background,

    y(x) = offset + g_amp exp(-(x - g_c)**2 / (2 g_w**2))
           + sum_j a_j w_j**2 / (w_j**2 + (x - c)**2)

where the Gaussian term is present only for ``background="gaussian"``.
Widths are optimised in log space so they stay positive.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .errors import GuessError, ParameterError

__all__ = [
    "CompositeFit",
    "composite_model",
    "fit_composite",
    "auto_initial_guess",
    "estimate_noise",
    "CompositeResonanceRegressor",
]

logger = logging.getLogger(__name__)

_BACKGROUNDS = ("flat", "gaussian")
MIN_POINTS = 12


@dataclass
class CompositeFit:
    """Parameters of a composite resonance, with fit diagnostics.

    Components are stored narrowest first.  ``stderr`` maps parameter names
    (``center``, ``a0``, ``w0``, ..., ``offset``, ``g_amp``, ``g_width``,
    ``g_center``) to standard errors; unavailable errors are ``inf``.
    """

    amplitudes: tuple
    widths: tuple
    center: float = 0.0
    offset: float = 0.0
    background: str = "flat"
    g_amp: float = 0.0
    g_width: float = 1.0
    g_center: float = 0.0
    stderr: dict = field(default_factory=dict)
    residual_norm: float = math.nan
    converged: bool = False
    identifiable: bool = True
    message: str = ""
    nfev: int = 0

    def __post_init__(self):
        self.amplitudes = tuple(float(a) for a in self.amplitudes)
        self.widths = tuple(float(w) for w in self.widths)
        if len(self.amplitudes) != len(self.widths) or not self.widths:
            raise ParameterError("need matching, non-empty amplitude and width lists")
        if any(not (w > 0 and math.isfinite(w)) for w in self.widths):
            raise ParameterError(f"widths must be positive and finite, got {self.widths}")
        if self.background not in _BACKGROUNDS:
            raise ParameterError(f"background must be one of {_BACKGROUNDS}")
        if self.background == "gaussian" and not self.g_width > 0:
            raise ParameterError("Gaussian background width must be positive")

    @property
    def n_components(self):
        return len(self.widths)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return composite_model(x, self.amplitudes, self.widths, self.center, self.offset,
                               self.background, self.g_amp, self.g_width, self.g_center)

    def relative_amplitudes(self):
        """Amplitudes divided by the flat offset (the ``A_k`` of a theory lineshape)."""
        return tuple(a / self.offset for a in self.amplitudes)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["stderr"] = {k: (None if not math.isfinite(v) else v) for k, v in self.stderr.items()}
        if not math.isfinite(d["residual_norm"]):
            d["residual_norm"] = None
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ParameterError(f"unknown fit keys: {sorted(unknown)}")
        d = dict(d)
        if d.get("residual_norm") is None:
            d.pop("residual_norm", None)
        if "stderr" in d:
            d["stderr"] = {k: (math.inf if v is None else v) for k, v in d["stderr"].items()}
        return cls(**d)

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=2)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def composite_model(x, amplitudes, widths, center=0.0, offset=0.0, background="flat",
                    g_amp=0.0, g_width=1.0, g_center=0.0):
    u = np.asarray(x, dtype=float) - center
    y = np.full(u.shape, float(offset))
    for a, w in zip(amplitudes, widths):
        y += a * w * w / (w * w + u * u)
    if background == "gaussian":
        y += g_amp * np.exp(-0.5 * ((np.asarray(x) - g_center) / g_width) ** 2)
    return y


class _Layout:
    """Map between a CompositeFit and the flat optimisation vector."""

    def __init__(self, n_components, background, fit_center):
        self.n = n_components
        self.background = background
        self.fit_center = fit_center
        names = [f"a{j}" for j in range(self.n)] + [f"w{j}" for j in range(self.n)]
        if fit_center:
            names.append("center")
        names.append("offset")
        if background == "gaussian":
            names += ["g_amp", "g_width", "g_center"]
        self.names = names

    def pack(self, fit):
        v = list(fit.amplitudes) + [math.log(w) for w in fit.widths]
        if self.fit_center:
            v.append(fit.center)
        v.append(fit.offset)
        if self.background == "gaussian":
            v += [fit.g_amp, math.log(fit.g_width), fit.g_center]
        return np.array(v, dtype=float)

    def unpack(self, v, template):
        n = self.n
        amps = v[:n]
        widths = np.exp(v[n:2 * n])
        i = 2 * n
        center = template.center
        if self.fit_center:
            center = v[i]
            i += 1
        offset = v[i]
        i += 1
        g = (0.0, 1.0, 0.0)
        if self.background == "gaussian":
            g = (v[i], math.exp(v[i + 1]), v[i + 2])
        return amps, widths, center, offset, g

    def model(self, v, x, template):
        amps, widths, center, offset, g = self.unpack(v, template)
        return composite_model(x, amps, widths, center, offset, self.background, *g)

    def natural_scale(self, v):
        """Derivative of natural parameters with respect to the packed ones."""
        d = np.ones_like(v)
        n = self.n
        d[n:2 * n] = np.exp(v[n:2 * n])
        if self.background == "gaussian":
            d[-2] = math.exp(v[-2])
        return d


def _central_jacobian(fun, v, f0=None):
    """Central differences with a step scaled to each parameter's magnitude."""
    eps = np.finfo(float).eps ** (1 / 3)
    cols = []
    for j in range(v.size):
        h = eps * max(abs(v[j]), 1.0)
        vp = v.copy()
        vm = v.copy()
        vp[j] += h
        vm[j] -= h
        h_eff = vp[j] - vm[j]
        cols.append((fun(vp) - fun(vm)) / h_eff)
    return np.column_stack(cols)


def _sorted_fit(fit_kwargs):
    order = np.argsort(fit_kwargs["widths"])
    fit_kwargs["widths"] = tuple(np.asarray(fit_kwargs["widths"])[order])
    fit_kwargs["amplitudes"] = tuple(np.asarray(fit_kwargs["amplitudes"])[order])
    return order


def fit_composite(x, y=None, init="auto", n_components=3, background="gaussian",
                  fit_center=True, max_iter=200, xtol=1e-10):
    """Fit a composite resonance by Levenberg-Marquardt.

    Parameters
    ----------
    x : array_like or Spectrum
        Beat detunings, or a spectrum object carrying ``delta`` and ``signal``.
    y : array_like, optional
        Signal values (omit when ``x`` is a spectrum).
    init : CompositeFit or "auto"
        Starting point; ``"auto"`` calls :func:`auto_initial_guess`.
    n_components : int
        Number of Lorentzians.
    background : {"flat", "gaussian"}
    fit_center : bool
        Whether the shared centre is a free parameter.
    max_iter : int
        Cap on residual evaluations by the optimiser.
    xtol : float
        Relative step tolerance.

    Returns
    -------
    CompositeFit
        Always returned; failures show up as ``converged=False`` with a
        message instead of an exception.
    """
    x, y = _xy(x, y)
    if background not in _BACKGROUNDS:
        raise ParameterError(f"background must be one of {_BACKGROUNDS}")
    if isinstance(init, str):
        if init != "auto":
            raise ParameterError(f"init must be a CompositeFit or 'auto', got {init!r}")
        init = auto_initial_guess(x, y, n_components=n_components, background=background)
    if init.n_components != n_components or init.background != background:
        init = _conform(init, n_components, background, x)
    layout = _Layout(n_components, background, fit_center)
    if x.size < max(MIN_POINTS, len(layout.names)):
        raise ParameterError(
            f"need at least {max(MIN_POINTS, len(layout.names))} points, got {x.size}")
    v0 = layout.pack(init)
    if not np.all(np.isfinite(v0)):
        raise ParameterError("initial guess is not finite")

    def resid(v):
        return layout.model(v, x, init) - y

    def jac(v):
        return _central_jacobian(resid, v)

    base = dict(center=init.center, background=background)
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            res = least_squares(resid, v0, jac=jac, method="lm", xtol=xtol, ftol=1e-15,
                                gtol=1e-15, max_nfev=max_iter, x_scale=1.0)
    except Exception as exc:  # noqa: BLE001 - report, never crash
        logger.warning("fit aborted: %s", exc)
        return dataclasses.replace(init, converged=False, message=f"aborted: {exc}",
                                   stderr={n: math.inf for n in layout.names},
                                   residual_norm=float(np.linalg.norm(resid(v0))))
    v = res.x
    if not np.all(np.isfinite(v)) or not np.all(np.isfinite(res.fun)):
        return dataclasses.replace(init, converged=False, message="non-finite parameters",
                                   stderr={n: math.inf for n in layout.names},
                                   residual_norm=float(np.linalg.norm(resid(v0))))
    amps, widths, center, offset, g = layout.unpack(v, init)
    # standard errors from the covariance, mapped to natural parameters
    J = _central_jacobian(resid, v) / layout.natural_scale(v)
    dof = max(x.size - v.size, 1)
    s2 = float(res.fun @ res.fun) / dof
    identifiable = True
    try:
        sv = np.linalg.svd(J, compute_uv=False)
        cond = sv[0] / sv[-1] if sv[-1] > 0 else math.inf
        if cond > 1e12:
            identifiable = False
        cov = np.linalg.pinv(J.T @ J) * s2
        se = np.sqrt(np.clip(np.diag(cov), 0.0, None))
        if not identifiable:
            se = np.full(v.size, math.inf)
    except np.linalg.LinAlgError:
        identifiable = False
        se = np.full(v.size, math.inf)
    se = np.where(np.isfinite(se), se, math.inf)
    w_sorted = np.sort(widths)
    if np.any(np.diff(w_sorted) <= 1e-6 * w_sorted[1:]):
        identifiable = False
    stderr = dict(zip(layout.names, (float(s) for s in se)))
    kwargs = dict(base, amplitudes=tuple(amps), widths=tuple(widths), center=center,
                  offset=offset)
    order = _sorted_fit(kwargs)
    # relabel per-component errors to follow the sorted order
    for key in ("a", "w"):
        vals = [stderr[f"{key}{j}"] for j in range(n_components)]
        for new, old in enumerate(order):
            stderr[f"{key}{new}"] = vals[old]
    if not fit_center:
        stderr["center"] = 0.0
    if background == "gaussian":
        kwargs.update(g_amp=g[0], g_width=g[1], g_center=g[2])
    converged = bool(res.success) and res.status > 0
    msg = res.message if identifiable else res.message + "; components not identifiable"
    return CompositeFit(**kwargs, stderr=stderr, residual_norm=float(np.linalg.norm(res.fun)),
                        converged=converged, identifiable=identifiable, message=msg,
                        nfev=int(res.nfev))


def _xy(x, y):
    if y is None:
        x, y = x.delta, x.signal
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ParameterError("x and y must have the same length")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ParameterError("spectrum contains non-finite values")
    return x, y


def _conform(init, n_components, background, x):
    """Pad or trim a guess to the requested component count and background."""
    amps = list(init.amplitudes)
    widths = list(init.widths)
    while len(widths) < n_components:
        widths.append(widths[-1] * 3.0)
        amps.append(0.1 * amps[-1])
    amps, widths = amps[:n_components], widths[:n_components]
    span = float(np.ptp(x)) or 1.0
    return dataclasses.replace(
        init, amplitudes=tuple(amps), widths=tuple(widths), background=background,
        g_width=init.g_width if background == "gaussian" and init.g_width > 0 else span)


def estimate_noise(y):
    """Noise level from second differences (robust to smooth structure)."""
    y = np.asarray(y, dtype=float)
    if y.size < 4:
        return 0.0
    d2 = np.diff(y, 2)
    mad = np.median(np.abs(d2 - np.median(d2)))
    return float(1.4826 * mad / math.sqrt(6.0))


def _half_width(x, r, center_idx):
    """Half-width at half-prominence around ``center_idx`` of a (positive) feature."""
    half = 0.5 * r[center_idx]
    above = r >= half
    lo = center_idx
    while lo > 0 and above[lo - 1]:
        lo -= 1
    hi = center_idx
    while hi < r.size - 1 and above[hi + 1]:
        hi += 1
    # interpolate the crossings
    def cross(i_in, i_out):
        if i_out < 0 or i_out >= r.size:
            return x[i_in]
        x0, x1, y0, y1 = x[i_out], x[i_in], r[i_out], r[i_in]
        return x0 + (half - y0) * (x1 - x0) / (y1 - y0) if y1 != y0 else x1
    left = cross(lo, lo - 1)
    right = cross(hi, hi + 1)
    return max(0.5 * (right - left), 0.5 * float(np.min(np.diff(x))))


def _fit_single(x, r, center, w_start, a_start, w_min, w_max, free_offset=False):
    """Bounded one-Lorentzian fit of a positive feature.

    Returns ``(a, w, c)`` where ``c`` is a constant shift of the residual
    (zero unless ``free_offset``).
    """
    def res(p):
        w2 = p[1] * p[1]
        c = p[2] if free_offset else 0.0
        return p[0] * w2 / (w2 + (x - center) ** 2) + c - r

    a_hi = max(4.0 * a_start, 1e-300)
    w0 = min(max(w_start, w_min), w_max)
    p0, lo, hi = [min(a_start, a_hi), w0], [0.0, w_min], [a_hi, w_max]
    if free_offset:
        p0, lo, hi = p0 + [0.0], lo + [-a_hi], hi + [a_hi]
    sol = least_squares(res, p0, bounds=(lo, hi), method="trf")
    c = float(sol.x[2]) if free_offset else 0.0
    return float(sol.x[0]), float(sol.x[1]), c


def auto_initial_guess(x, y=None, n_components=3, background="gaussian"):
    """Starting parameters for :func:`fit_composite` by progressive peeling.

    The offset comes from the spectrum tails.  The widest Lorentzian is fitted
    to the wings outside the half-prominence width, subtracted, and the
    procedure repeats on the residual for the narrower components.

    Raises
    ------
    GuessError
        If the spectrum shows no feature above its noise level.
    """
    x, y = _xy(x, y)
    if x.size < 8:
        raise GuessError("too few points for an initial guess")
    order = np.argsort(x)
    x, y = x[order], y[order]
    ntail = max(2, x.size // 20)
    offset = float(np.median(np.concatenate((y[:ntail], y[-ntail:]))))
    r = y - offset
    noise = estimate_noise(y)
    idx = int(np.argmax(np.abs(r)))
    prominence = abs(r[idx])
    scale = max(np.max(np.abs(y)), 1e-300)
    if prominence <= max(5.0 * noise, 1e-9 * scale):
        raise GuessError(
            f"no resonance feature: prominence {prominence:.3g} vs noise {noise:.3g}")
    sign = 1.0 if r[idx] > 0 else -1.0
    center = float(x[idx])
    amps, widths = [], []
    resid = sign * r
    span = float(np.ptp(x))
    w_min = 0.5 * float(np.min(np.diff(x)))
    for j in range(n_components):
        k = int(np.argmax(resid)) if j else idx
        if resid[k] <= 0:
            break
        hw = _half_width(x, resid, k)
        last = j == n_components - 1
        mask = np.ones_like(x, dtype=bool) if last else np.abs(x - center) >= hw
        if np.count_nonzero(mask) < 4:
            mask = np.ones_like(x, dtype=bool)
        try:
            # on a flat background the tails still carry the wings of the
            # widest line, so the offset is refined together with it
            a, w, c = _fit_single(x[mask], resid[mask], center, hw, float(resid[k]), w_min,
                                  span, free_offset=j == 0 and background == "flat")
        except (ValueError, FloatingPointError):
            a, w, c = float(resid[k]), hw, 0.0
        offset += sign * c
        resid = resid - c
        if not (math.isfinite(a) and math.isfinite(w) and w > 0):
            a, w = float(resid[k]), hw
        amps.append(sign * a)
        widths.append(w)
        resid = resid - a * w * w / (w * w + (x - center) ** 2)
    while len(widths) < n_components:
        widths.append(widths[-1] / 3.0)
        amps.append(0.1 * amps[-1])
    # keep widths distinct so the components are distinguishable from the start
    widths = np.array(widths)
    for j in range(1, widths.size):
        for i in range(j):
            if abs(widths[j] - widths[i]) < 0.05 * widths[i]:
                widths[j] = widths[i] * 0.5
    fit = dict(amplitudes=tuple(amps), widths=tuple(widths))
    _sorted_fit(fit)
    g = {}
    if background == "gaussian":
        g = dict(g_amp=0.0, g_width=span / 2.0, g_center=center)
    return CompositeFit(center=center, offset=offset, background=background,
                        message="initial guess", **fit, **g)


class CompositeResonanceRegressor(RegressorMixin, BaseEstimator):
    """Estimator interface to :func:`fit_composite`.

    Parameters
    ----------
    n_components : int, default 3
        Number of Lorentzian components.
    background : {"gaussian", "flat"}, default "gaussian"
    fit_center : bool, default True
    max_iter : int, default 200
    xtol : float, default 1e-10
    init : CompositeFit or "auto", default "auto"

    Attributes
    ----------
    fit_ : CompositeFit
        Result of the last call to :meth:`fit`.
    converged_ : bool
    """

    def __init__(self, n_components=3, background="gaussian", fit_center=True,
                 max_iter=200, xtol=1e-10, init="auto"):
        self.n_components = n_components
        self.background = background
        self.fit_center = fit_center
        self.max_iter = max_iter
        self.xtol = xtol
        self.init = init

    def fit(self, X, y):
        x = np.asarray(X, dtype=float)
        if x.ndim == 2:
            if x.shape[1] != 1:
                raise ParameterError("X must have a single feature (the detuning)")
            x = x[:, 0]
        self.fit_ = fit_composite(x, y, init=self.init, n_components=self.n_components,
                                  background=self.background, fit_center=self.fit_center,
                                  max_iter=self.max_iter, xtol=self.xtol)
        self.converged_ = self.fit_.converged
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        x = np.asarray(X, dtype=float)
        if x.ndim == 2:
            x = x[:, 0]
        return self.fit_(x)
