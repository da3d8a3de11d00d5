"""Elim-NS for non-stationary one-sided full-information bandits, with the
second-price-auction reduction, environment generators and analysis tools."""

from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
