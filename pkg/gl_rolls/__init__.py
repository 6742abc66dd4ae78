"""Numerical laboratory for the stability of Ginzburg-Landau roll solutions."""

__version__ = "0.1.0a1"
