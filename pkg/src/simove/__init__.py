"""Simultaneous-move Monte Carlo tree search with regret-minimizing selection,
plus exact solvers for measuring how close the search gets to equilibrium."""

__version__ = "0.1.0"
