"""Spectral Galerkin solver and bifurcation toolkit for Kolmogorov flow with a fast mean flow."""

__version__ = "0.1.0"
