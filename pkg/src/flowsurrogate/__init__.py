"""Uncertainty-aware flow-based surrogate modeling and parameter exploration."""

__version__ = "0.1.0"
