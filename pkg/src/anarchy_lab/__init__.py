"""Selfish routing on multi-path networks: optima, LI/PI equilibria, Prices of Anarchy."""

__version__ = "0.1.0"
