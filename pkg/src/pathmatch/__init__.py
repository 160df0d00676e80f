"""Behavior-path matching CTR model with a minimal reverse-mode compute core."""

__version__ = "0.1.0"
