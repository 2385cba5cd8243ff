"""Configuration, random baths, result files and the command-line interface."""

from .baths import draw_random_bath

__all__ = ["draw_random_bath"]
