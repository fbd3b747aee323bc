"""Near-best polynomial approximation of piecewise analytic functions on arcs."""

__version__ = "0.1.0"
