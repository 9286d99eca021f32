"""Attention-derived agent importance for trajectory prediction."""

__version__ = "0.1.0"
