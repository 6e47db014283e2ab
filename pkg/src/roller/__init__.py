"""Relational decision-tree control knowledge for forward STRIPS planning."""

__version__ = "0.1.0"
