"""Exciton reaction-coordinate toolkit for 2D semiconductors coupled to resonators."""

__version__ = "0.1.0"
