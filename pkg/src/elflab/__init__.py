"""Numerical laboratory for electric flows, quantum walks and the elfs process."""
__version__ = "0.1.0"
