"""Radial Schrodinger-Poisson bound states, stability, and dynamics."""

__version__ = "0.1.0"
