"""Algebraically observable PINNs for SEIR onset-rate estimation."""

__version__ = "0.1.0"
