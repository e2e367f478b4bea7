"""Numerical laboratory for mKdV breather orbital stability."""

__version__ = "0.1.0"
