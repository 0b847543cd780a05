"""Toy-scale graph-aware dialogue response generator."""

__version__ = "0.1.0"
