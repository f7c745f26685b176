"""Exact and randomized-measurement estimates of (partial) spectral form factors."""

__version__ = "0.1.0"
