"""Birkhoff-Rott-alpha vortex sheet laboratory."""
__version__ = "0.1.0"
