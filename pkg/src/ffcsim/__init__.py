"""MPC-based fast frequency control toolkit for low-inertia grids."""

__version__ = "0.1.0"
