"""Physical parameters of the bichromatically driven two-level system.

All rates and frequencies share one angular-frequency unit.  Configurations
written "in units of gamma" simply set ``gamma = 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .errors import ParameterError, UnsupportedConfigurationError

__all__ = [
    "SystemParams",
    "relaxation_rates",
    "lorentz",
    "saturation_parameter",
    "with_saturation",
    "with_beat",
    "params_from_config",
    "load_config",
]

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class SystemParams:
    """Rates, frequencies, field strengths and equilibrium populations.

    Attributes
    ----------
    gamma : float
        Mean population relaxation rate.  Sets the time scale.
    epsilon : float
        Relaxation asymmetry; level ``k`` relaxes at ``gamma*(1 -/+ epsilon)``.
    Gamma_coh : float
        Coherence relaxation rate.
    omega0, omega1, omega2 : float
        Resonance frequency and the two microwave frequencies.
    Omega1, Omega2 : float
        Rabi frequencies of the two microwaves.
    n1_eq, n0_eq : float
        Equilibrium populations, summing to one.
    """

    gamma: float
    epsilon: float
    Gamma_coh: float
    omega0: float = 0.0
    omega1: float = 0.0
    omega2: float = 0.0
    Omega1: float = 0.0
    Omega2: float = 0.0
    n1_eq: float = 1.0
    n0_eq: float = 0.0

    def __post_init__(self):
        for name in _FIELD_NAMES:
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ParameterError(f"{name} must be finite, got {value!r}")
        if self.gamma <= 0:
            raise ParameterError(f"gamma must be positive, got {self.gamma}")
        if self.Gamma_coh <= 0:
            raise ParameterError(f"Gamma_coh must be positive, got {self.Gamma_coh}")
        if not abs(self.epsilon) < 1:
            raise ParameterError(f"|epsilon| must be < 1, got {self.epsilon}")
        for name in ("n1_eq", "n0_eq"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")
        if abs(self.n1_eq + self.n0_eq - 1.0) > _NORM_TOL:
            raise ParameterError(
                f"equilibrium populations must sum to 1, got {self.n1_eq + self.n0_eq}"
            )

    @property
    def delta(self):
        """Beat frequency ``omega1 - omega2``."""
        return self.omega1 - self.omega2

    @property
    def detuning(self):
        """Detuning of the first microwave, ``omega1 - omega0``."""
        return self.omega1 - self.omega0

    @property
    def dn_eq(self):
        """Equilibrium population difference ``n1_eq - n0_eq``."""
        return self.n1_eq - self.n0_eq

    @property
    def equal_drive(self):
        return math.isclose(self.Omega1, self.Omega2, rel_tol=1e-12, abs_tol=0.0)

    def to_config(self):
        """Inverse of :func:`params_from_config`."""
        cfg = {
            "gamma": self.gamma,
            "epsilon": self.epsilon,
            "Gamma": self.Gamma_coh,
            "omega0": self.omega0,
            "omega1": self.omega1,
            "omega2": self.omega2,
            "n1_eq": self.n1_eq,
            "n0_eq": self.n0_eq,
        }
        if self.equal_drive:
            cfg["Omega"] = self.Omega1
        else:
            cfg["Omega1"], cfg["Omega2"] = self.Omega1, self.Omega2
        return cfg


_FIELD_NAMES = tuple(f.name for f in fields(SystemParams))


def relaxation_rates(params):
    """Return ``(gamma1, gamma0) = (gamma(1+eps), gamma(1-eps))``."""
    g, e = params.gamma, params.epsilon
    return g * (1.0 + e), g * (1.0 - e)


def lorentz(a, x):
    """Peak-normalised Lorentzian ``a**2 / (x**2 + a**2)``.

    Accepts scalars or arrays for ``x``.
    """
    a = np.asarray(a, dtype=float)
    if np.any(a <= 0):
        raise ParameterError(f"Lorentz half-width must be positive, got {a}")
    x = np.asarray(x, dtype=float)
    out = a * a / (x * x + a * a)
    return float(out) if out.ndim == 0 else out


def saturation_parameter(params):
    """Dimensionless drive strength entering the population equations.

    ``S = Omega**2 / (2 gamma Gamma) * (L(omega1-omega0) + L(omega2-omega0))``
    with ``L`` the Lorentzian of half-width ``Gamma``.  With this
    normalisation the adiabatic limit of the master equation is exactly
    ``dn1/d(gamma t) = ... - S (1 + cos(delta t)) (n1 - n0)``.

    Raises
    ------
    UnsupportedConfigurationError
        If the two Rabi frequencies differ.
    """
    if not params.equal_drive:
        raise UnsupportedConfigurationError(
            "saturation parameter requires Omega1 == Omega2 "
            f"(got {params.Omega1}, {params.Omega2})"
        )
    G = params.Gamma_coh
    lor = lorentz(G, params.omega1 - params.omega0) + lorentz(G, params.omega2 - params.omega0)
    return params.Omega1**2 / (2.0 * params.gamma * G) * lor


def with_saturation(params, S):
    """Copy of ``params`` with both Rabi frequencies set so that S equals ``S``."""
    if S < 0:
        raise ParameterError(f"saturation parameter must be non-negative, got {S}")
    G = params.Gamma_coh
    lor = lorentz(G, params.omega1 - params.omega0) + lorentz(G, params.omega2 - params.omega0)
    omega = math.sqrt(2.0 * params.gamma * G * S / lor)
    return replace(params, Omega1=omega, Omega2=omega)


def with_beat(params, delta):
    """Copy of ``params`` with ``omega1 = omega2 + delta`` (second field held fixed)."""
    return replace(params, omega1=params.omega2 + float(delta))


_KNOWN_KEYS = {
    "gamma", "epsilon", "Gamma", "Gamma_coh", "omega0", "omega1", "omega2",
    "delta", "Omega", "Omega1", "Omega2", "S", "n1_eq", "n0_eq", "units",
}


def params_from_config(cfg):
    """Build :class:`SystemParams` from a config mapping.

    Recognised keys: ``gamma``, ``epsilon``, ``Gamma``, ``omega0``,
    ``omega1``, ``omega2``, ``Omega`` (fans out to both fields) or
    ``Omega1``/``Omega2``, ``n1_eq``, ``n0_eq``.  Conveniences: ``delta``
    sets ``omega1 = omega2 + delta``; ``S`` picks ``Omega`` to reach that
    saturation parameter; ``"units": "gamma"`` fixes ``gamma = 1``.
    """
    cfg = dict(cfg)
    unknown = set(cfg) - _KNOWN_KEYS
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    units = cfg.pop("units", None)
    if units not in (None, "gamma", "absolute"):
        raise ParameterError(f"units must be 'gamma' or 'absolute', got {units!r}")
    try:
        if units == "gamma":
            if "gamma" in cfg and float(cfg["gamma"]) != 1.0:
                raise ParameterError("units='gamma' requires gamma == 1")
            gamma = 1.0
        else:
            gamma = float(cfg["gamma"])
        epsilon = float(cfg["epsilon"])
        if "Gamma" in cfg and "Gamma_coh" in cfg:
            raise ParameterError("give only one of Gamma / Gamma_coh")
        Gamma = float(cfg.get("Gamma", cfg.get("Gamma_coh")))
    except KeyError as exc:
        raise ParameterError(f"missing config key: {exc.args[0]}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ParameterError):
            raise
        raise ParameterError(f"bad numeric value in config: {exc}") from None

    omega0 = float(cfg.get("omega0", 0.0))
    omega2 = float(cfg.get("omega2", omega0))
    if "omega1" in cfg and "delta" in cfg:
        raise ParameterError("give only one of omega1 / delta")
    omega1 = float(cfg["omega1"]) if "omega1" in cfg else omega2 + float(cfg.get("delta", 0.0))

    drive_keys = [k for k in ("Omega", "S") if k in cfg]
    pair = [k for k in ("Omega1", "Omega2") if k in cfg]
    if len(drive_keys) + (1 if pair else 0) > 1:
        raise ParameterError("give exactly one of Omega, S or Omega1/Omega2")
    if pair and len(pair) != 2:
        raise ParameterError("Omega1 and Omega2 must be given together")
    if "Omega" in cfg:
        Omega1 = Omega2 = float(cfg["Omega"])
    elif pair:
        Omega1, Omega2 = float(cfg["Omega1"]), float(cfg["Omega2"])
    else:
        Omega1 = Omega2 = 0.0

    if "n1_eq" in cfg or "n0_eq" in cfg:
        n1 = float(cfg["n1_eq"]) if "n1_eq" in cfg else 1.0 - float(cfg["n0_eq"])
        n0 = float(cfg["n0_eq"]) if "n0_eq" in cfg else 1.0 - n1
    else:
        n1, n0 = 1.0, 0.0

    params = SystemParams(
        gamma=gamma, epsilon=epsilon, Gamma_coh=Gamma,
        omega0=omega0, omega1=omega1, omega2=omega2,
        Omega1=Omega1, Omega2=Omega2, n1_eq=n1, n0_eq=n0,
    )
    if "S" in cfg:
        params = with_saturation(params, float(cfg["S"]))
    return params


def load_config(path):
    """Read a JSON config file into :class:`SystemParams`."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParameterError(f"invalid JSON in {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ParameterError(f"config {path} must hold a JSON object")
    return params_from_config(cfg)
