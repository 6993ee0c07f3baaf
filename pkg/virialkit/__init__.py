"""Density/activity inversion for multi-species classical gases."""

__version__ = "0.1.0"
