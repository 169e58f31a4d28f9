"""Repeater-network entanglement simulator with an exact density-matrix oracle."""

__version__ = "0.1.0"
