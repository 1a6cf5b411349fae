"""Semantic clone detection for a C subset via event dependency graphs."""

__version__ = "0.1.0"
