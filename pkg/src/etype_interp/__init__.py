"""Weighted Lagrange and Hermite interpolation of exponential type on Hermite-Biehler nodes."""

__version__ = "0.1.0"
