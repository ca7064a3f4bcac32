"""Optimal menus of statistical experiments sold to buyers with private beliefs."""

__version__ = "0.1.0"
