"""Numerical verification of curvature identities on (quasi) Yamabe solitons."""

__version__ = "0.1.0"
