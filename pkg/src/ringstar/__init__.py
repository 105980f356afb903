"""Quantum information dynamics in the ring-star Ising model."""

__version__ = "0.1.0"
