"""Discrete-event simulator of a multi-core mixed-signal neuromorphic processor."""

__version__ = "0.1.0"
