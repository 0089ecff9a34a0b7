"""Numerical laboratory for Rayleigh-Taylor instability of viscous fluids."""

__version__ = "0.1.0"
