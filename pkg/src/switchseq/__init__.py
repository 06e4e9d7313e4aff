"""Switching-sequence design and analysis for switched-array channel sounders."""

__version__ = "0.1.0"
