"""Fog service placement by device communities and service transitive closures."""

__version__ = "0.1.0"
