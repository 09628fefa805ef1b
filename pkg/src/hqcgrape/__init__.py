"""Closed-loop (hybrid quantum-classical) GRAPE for quantum Fisher information."""

__version__ = "0.1.0"
