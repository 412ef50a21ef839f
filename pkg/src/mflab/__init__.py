"""Numerical laboratory for Wasserstein concentration of empirical measures."""
__version__ = "0.1.0"
