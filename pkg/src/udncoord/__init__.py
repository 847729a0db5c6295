"""Spatial coordination strategies for ultra-dense wireless networks."""

__version__ = "0.1.0"
