"""Alternating e-/m-projection estimators with auditable convergence traces."""

from ._base import DomainError, EmConfig, FitError, InfoGeoError, Trace
from .geometry import (as_probability, e_interpolate, kl_divergence, m_interpolate,
                       normalize, pythagorean_residual)

__version__ = "0.1.0"

__all__ = [
    "DomainError", "EmConfig", "FitError", "InfoGeoError", "Trace",
    "as_probability", "e_interpolate", "kl_divergence", "m_interpolate",
    "normalize", "pythagorean_residual",
]
