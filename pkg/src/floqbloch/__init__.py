"""Floquet band engineering with Bloch oscillations: bands, Chern numbers, pumps."""

__version__ = "0.1.0"
