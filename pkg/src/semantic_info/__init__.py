"""Semantic information measures, limits and coding simulations on finite alphabets."""

__version__ = "0.1.0"
