"""Simulation and verification toolkit for Sinai's random walk in random environment."""

__version__ = "0.1.0"
