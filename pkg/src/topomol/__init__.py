"""Topological molecular fingerprints and distance-aware SSL objectives."""

__version__ = "0.1.0"
