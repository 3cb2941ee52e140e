"""Coherent population oscillations of a bichromatically driven open two-level system.

The package offers four model tiers of decreasing cost: the full
rotating-frame master equation (:mod:`cpo.master`), its harmonic-balance
steady state (:mod:`cpo.harmonic`), the adiabatic population model and its
dressed-state form (:mod:`cpo.dressed`), and closed-form lineshapes
(:mod:`cpo.analytic`).  :mod:`cpo.scan` and :mod:`cpo.fitting` run scans,
sweeps and composite-resonance fits on top of them.
"""
__version__ = "0.1.0"

from .analytic import (ResonanceShape, first_harmonic_solve, fluorescence_signal,
                       resonance_shape, strong_field_widths, tau_mu_nu)
from .dressed import (DressedFrame, PopulationState, dressed_coordinates, eigen_frame,
                      integrate_dressed, integrate_reduced, liouvillian_parts,
                      stationary_solution, strong_field_derivative)
from .errors import (CPOError, ConvergenceError, DegenerateFrameError, DomainError, GuessError,
                     InsufficientSpanError, IntegrationError, ParameterError, SolverError,
                     UnsupportedConfigurationError)
from .fitting import CompositeFit, CompositeResonanceRegressor, auto_initial_guess, fit_composite
from .harmonic import (HarmonicSolution, auto_truncation, coherence_harmonics, kernels,
                       solve_harmonic_balance)
from .integrate import Trajectory, period_average
from .master import DensityState, derivative, integrate_full, trace_flux
from .params import SystemParams, lorentz, load_config, params_from_config, saturation_parameter
from .scan import Spectrum, analytic_spectrum, scan_delta, sweep_power

__all__ = [
    "SystemParams", "lorentz", "saturation_parameter", "params_from_config", "load_config",
    "DensityState", "derivative", "integrate_full", "trace_flux", "Trajectory", "period_average",
    "HarmonicSolution", "kernels", "solve_harmonic_balance", "coherence_harmonics",
    "auto_truncation",
    "PopulationState", "DressedFrame", "integrate_reduced", "liouvillian_parts",
    "stationary_solution", "eigen_frame", "dressed_coordinates", "integrate_dressed",
    "strong_field_derivative",
    "ResonanceShape", "tau_mu_nu", "resonance_shape", "strong_field_widths",
    "fluorescence_signal", "first_harmonic_solve",
    "Spectrum", "scan_delta", "analytic_spectrum", "sweep_power",
    "CompositeFit", "CompositeResonanceRegressor", "fit_composite", "auto_initial_guess",
    "CPOError", "ParameterError", "UnsupportedConfigurationError", "IntegrationError",
    "InsufficientSpanError", "SolverError", "ConvergenceError", "DomainError",
    "DegenerateFrameError", "GuessError",
]
