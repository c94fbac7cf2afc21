"""Quasimorphisms from equivariant moment maps on Siegel space and on surfaces."""

__version__ = "0.1.0"
