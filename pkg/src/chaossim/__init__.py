"""Simulation toolkit for the random power series exp(sum_k X(k) z^k / sqrt(k))."""

__version__ = "0.1.0"
