"""Finite-volume glass-air-PCM solar chimney model with ROM data assimilation."""

__version__ = "0.1.0"
