"""Quadrature noise spectra of a below-threshold parametric amplifier in a compound cavity."""

__version__ = "0.1.0"
