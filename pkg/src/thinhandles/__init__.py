"""Rate constants, parameter regimes and discrete spectral checks for manifolds with thin handles."""

from . import bessel, constants, handles, regimes, spectra
from ._errors import DomainError, HandleError, NumericalError, RangeError, ValidationError

__version__ = "0.1.0"

__all__ = [
    "bessel",
    "constants",
    "handles",
    "regimes",
    "spectra",
    "HandleError",
    "DomainError",
    "RangeError",
    "NumericalError",
    "ValidationError",
]
