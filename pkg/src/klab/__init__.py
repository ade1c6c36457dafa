"""Numerical laboratory for self-similar measures, random walks on the space
of unimodular lattices and the counting of psi-approximable rationals."""

__version__ = "0.1.0"
