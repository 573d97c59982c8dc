"""Representation-set optimization and client simulation for interactive multi-view streaming."""

__version__ = "0.1.0"
