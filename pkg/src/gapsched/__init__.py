"""Spectral-gap-informed schedule learning for QAOA."""

__version__ = "0.1.0"
