"""Quantum ensemble simulation, dequantization and concentration experiments."""

__version__ = "1.0.0"
