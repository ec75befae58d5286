"""Transmit covariance optimization for MIMO B-MAC interference networks."""

__version__ = "0.1.0"
