"""Numerics for unoriented Aviles-Giga energies."""
__version__ = "0.1.0"
