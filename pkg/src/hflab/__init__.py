"""Numerical laboratory for the homogeneous flow of framings on S^3."""

__version__ = "0.1.0"
