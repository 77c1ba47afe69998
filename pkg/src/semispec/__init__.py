"""Numerical laboratory for non-selfadjoint quadratic semiclassical operators."""

__version__ = "0.1.0"
