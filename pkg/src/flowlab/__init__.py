"""Numerical laboratory for the normalized Ricci flow on surfaces with boundary."""

__version__ = "0.1.0"
