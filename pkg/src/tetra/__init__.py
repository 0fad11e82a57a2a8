"""Numerical toolkit for tetrablock contractions, their fundamental operators and dilations."""

from tetra.errors import TetraError

__version__ = "0.1.0"

__all__ = ["TetraError", "__version__"]
