"""Exception hierarchy shared by the solver, diagnostics and harness."""


class IBCVError(Exception):
    """Base class for all package errors."""


class ConfigurationError(IBCVError, ValueError):
    """Invalid parameters, malformed configs or ill-posed problems."""

    def __init__(self, message, keys=None):
        super().__init__(message)
        self.keys = list(keys or [])


class GeometryError(IBCVError, ValueError):
    """Bodies, markers or control volumes that do not fit the domain."""


class NumericalFailure(IBCVError, RuntimeError):
    """A solve diverged, produced NaNs or missed its tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = list(residuals or [])


class StateError(IBCVError, RuntimeError):
    """An operation was called before the state it needs exists."""
