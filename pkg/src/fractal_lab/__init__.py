"""Numerical experiments on fractal curves: Brownian paths, Loewner traces,
fractal percolation and Brownian loop soups."""

__version__ = "0.1.0"
