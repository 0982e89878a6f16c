"""Composite-risk distributional RL with a bootstrapped categorical ensemble."""

__version__ = "0.1.0"
