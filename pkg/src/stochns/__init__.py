"""Pseudo-spectral simulation and statistics for the lambda-coupled stochastic 2D Navier-Stokes pair."""

__version__ = "0.1.0"
