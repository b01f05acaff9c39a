"""Quantum circuit Born machines for correlated numeric features."""

__version__ = "0.1.0"
