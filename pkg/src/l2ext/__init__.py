"""Numerical toolkit for optimal L2 extension constants with a denominator ``g``."""

from .denomcore import DenominatorSpec, c_of_g, h_delta, k_delta, normalize
from .exprlang import parse

__version__ = "0.1.0"

__all__ = ["DenominatorSpec", "c_of_g", "h_delta", "k_delta", "normalize", "parse", "__version__"]
