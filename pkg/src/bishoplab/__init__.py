"""Desk-scale numerics for weighted composition operators over circle rotations."""

__version__ = "0.1.0"
