"""Coordinate-free moving least squares on point clouds from algebraic surfaces."""

__version__ = "0.1.0"
