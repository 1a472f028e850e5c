"""Thin elastic rods with voids: 3D energies, the 1D limit and its recovery."""

__version__ = "0.1.0"
