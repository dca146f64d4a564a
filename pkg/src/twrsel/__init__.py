"""Relay selection for two-way decode-and-forward relaying with
effective-angle phase rotation: link-level Monte-Carlo and closed-form SER
analysis."""

__version__ = "0.1.0"

from .config import SchemeConfig, SweepSpec, load_config  # noqa: E402
from .core import (  # noqa: E402
    ConfigurationError,
    DegenerateChannelError,
    DomainError,
    InsufficientStatisticsError,
    NumericalError,
    RngStream,
    TwrError,
)
from .modem import make_constellation  # noqa: E402

__all__ = [
    "__version__",
    "SchemeConfig",
    "SweepSpec",
    "load_config",
    "make_constellation",
    "RngStream",
    "TwrError",
    "ConfigurationError",
    "DomainError",
    "DegenerateChannelError",
    "NumericalError",
    "InsufficientStatisticsError",
]
