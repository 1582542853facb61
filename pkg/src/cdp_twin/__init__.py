"""Stochastic digital twin of the copy-detection-pattern printing/imaging channel."""

from cdp_twin.errors import (
    CdpTwinError,
    FormatError,
    NumericalError,
    OutOfDomainError,
    ParameterError,
    UsageError,
)

__version__ = "0.1.0"

__all__ = [
    "CdpTwinError",
    "FormatError",
    "NumericalError",
    "OutOfDomainError",
    "ParameterError",
    "UsageError",
    "__version__",
]
