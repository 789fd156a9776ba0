"""Finite-element nudging data assimilation for 2D incompressible flow."""

__version__ = "0.1.0"
