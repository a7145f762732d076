"""Pseudo-spectral laboratory for dissipative QG dynamics with a dispersive term."""

__version__ = "0.1.0"
