"""Adversarial estimation of a structural retirement savings model."""

__version__ = "0.1.0"
