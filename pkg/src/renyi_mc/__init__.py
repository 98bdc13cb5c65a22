"""Entropic c-functions of the Ising model from non-equilibrium replica Monte Carlo."""

__version__ = "0.1.0"
