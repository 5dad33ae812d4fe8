"""Exception types shared across the package."""


class RootSolveError(RuntimeError):
    """A scalar monotone root solve did not converge.

    Attributes
    ----------
    lo, hi : ndarray
        Bracket state of the unconverged entries when the iteration stopped.
    residual : ndarray
        Residuals of the unconverged entries.
    """

    def __init__(self, message, lo=None, hi=None, residual=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi
        self.residual = residual


class UnsupportedConfigurationError(ValueError):
    """Requested evaluation is not defined for the given parameters."""


class LineSearchError(RuntimeError):
    """Backtracking could not produce sufficient decrease."""


class NewtonError(RuntimeError):
    """Damped Newton iteration failed; ``history`` holds residual norms."""

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


class ConfigError(ValueError):
    """Configuration failed validation.

    ``errors`` is a list of ``"field.path: message"`` strings.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
