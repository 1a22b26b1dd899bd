"""Voronoi coverage with constant-speed unicycles under continuous,
event-triggered and self-triggered control."""

__version__ = "0.1.0"
