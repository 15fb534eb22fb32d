"""Constrained discounted stochastic games: evaluation, constrained best responses,
epsilon-Nash search and m-CSG truncation."""

__version__ = "0.1.0"
