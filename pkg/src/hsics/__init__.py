"""Compressive sensing of hyperspectral spectra."""
__version__ = "0.1.0"
