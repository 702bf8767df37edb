"""Numerics for globally hyperbolic AdS structures on closed surfaces."""

__version__ = "0.1.0"
