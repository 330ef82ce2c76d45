"""Numerical laboratory for evolving ensemble densities under invertible dynamics."""

__version__ = "0.1.0"
