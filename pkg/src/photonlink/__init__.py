"""Toolkit for simulating an energy-time entangled photon link with wavelength transfer."""

__version__ = "0.1.0"
