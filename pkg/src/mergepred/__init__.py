"""Merge-conflict prediction from lightweight git history features."""

__version__ = "0.1.0"
