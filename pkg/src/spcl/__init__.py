"""Supervised prototypical contrastive learning with curriculum sampling."""

__version__ = "0.1.0"
