"""Exception hierarchy shared by all tiers."""


class CPOError(Exception):
    """Base class for errors raised by this package."""


class ParameterError(CPOError, ValueError):
    """Invalid physical parameters or configuration values."""


class UnsupportedConfigurationError(ParameterError):
    """Parameters are valid but not supported by the requested tier."""


class IntegrationError(CPOError, RuntimeError):
    """Time integration failed (step-size underflow, non-finite state)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class InsufficientSpanError(CPOError, ValueError):
    """A trajectory is too short for the requested averaging window."""


class SolverError(CPOError, RuntimeError):
    """Linear solve failed or produced an untrustworthy result."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class ConvergenceError(CPOError, RuntimeError):
    """An iterative procedure hit its cap without converging."""


class DomainError(CPOError, ValueError):
    """A closed-form expression was evaluated outside its domain."""


class DegenerateFrameError(DomainError):
    """The dressed-state eigenbasis is not unique (S = 0 and epsilon = 0)."""


class GuessError(CPOError, ValueError):
    """No initial guess could be derived from a spectrum."""
