"""Sparse averaging families on lattices and groups, with numerical checks of
their maximal inequalities, cancellation estimates and growth conditions."""

__version__ = "0.1.0"
