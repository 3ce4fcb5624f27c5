"""Clifford-analytic jump and Riemann boundary value problems on fractal curves."""

from .clifford import Multivector

__version__ = "0.1.0"

__all__ = ["Multivector", "__version__"]
