"""Exact WKB analysis of second-order linear ODEs with a small parameter."""

__version__ = "0.1.0"
