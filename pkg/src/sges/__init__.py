"""Sketch-guided equality saturation for a typed array combinator language."""

__version__ = "0.1.0"
