"""Two-dimensional immersed boundary flow solver with control-volume and
Lagrange-multiplier hydrodynamic force diagnostics."""

from .errors import ConfigurationError, GeometryError, IBCVError, NumericalFailure, StateError

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError",
    "GeometryError",
    "IBCVError",
    "NumericalFailure",
    "StateError",
    "__version__",
]
