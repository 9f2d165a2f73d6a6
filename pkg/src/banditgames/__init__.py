"""Bandit learning dynamics for monotone games."""

__version__ = "0.1.0"
