"""Exact and Monte Carlo tools for mixing of lazy walks and lamplighter chains."""

__version__ = "0.1.0"
