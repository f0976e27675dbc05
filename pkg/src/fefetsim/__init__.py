"""Grain-resolved quasi-static simulator for ferroelectric capacitors and FeFETs."""

__version__ = "0.1.0"
