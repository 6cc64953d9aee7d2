"""Stochastic-variational quantum hydrodynamics on curved 1-D and 2-D charts."""
__version__ = "0.1.0"
