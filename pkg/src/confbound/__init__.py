"""Exact-arithmetic graph complexes and configuration-space models over Q."""

__version__ = "0.1.0"
