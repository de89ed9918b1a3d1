"""Differential-form calculus over suspension Anosov flows."""

__version__ = "0.1.0"
