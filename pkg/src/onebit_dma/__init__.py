"""Uplink dynamic-metasurface receivers with 1-bit ADCs: combiner design and simulation."""

__version__ = "0.1.0"
