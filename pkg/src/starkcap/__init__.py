"""Resonances of 1D Stark-type operators via complex absorbing potentials."""

__version__ = "0.1.0"
