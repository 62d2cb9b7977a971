"""Spectral laboratory for wavepacket superposition in dispersive nonlinear systems."""

__version__ = "0.1.0"
