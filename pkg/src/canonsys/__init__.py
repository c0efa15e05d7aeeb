"""Explicit GBDT constructions for canonical systems, with numerical oracles."""

__version__ = "0.1.0"
