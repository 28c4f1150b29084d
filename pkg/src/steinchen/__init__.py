"""Stein-Chen Poisson and compound Poisson approximation toolkit."""

__version__ = "0.1.0"
