"""Sparse-pixel multitemporal InSAR processing chain."""

__version__ = "0.1.0"
