"""Equilibria and pricing for multi-user mobile edge computing offloading."""

__version__ = "1.0.0"
