"""Consistent-set selection via Schmidt projections for random-matrix models."""

__version__ = "0.1.0"
