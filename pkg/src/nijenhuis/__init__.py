"""Killing tensors, Nijenhuis torsion and integrability conditions, pointwise."""

__version__ = "0.1.0"
