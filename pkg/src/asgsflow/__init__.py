"""Galerkin and ASGS finite elements for coupled Navier-Stokes / transport problems."""

__version__ = "0.1.0"
