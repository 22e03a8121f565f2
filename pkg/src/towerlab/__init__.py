"""Numerical laboratory for sign-changing bubble-tower blow-up constructions."""

__version__ = "0.1.0"
