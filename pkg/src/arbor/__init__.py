"""Automorphisms of regular rooted trees, their congruence quotients and
Hausdorff-dimension data for self-similar groups."""

__version__ = "0.1.0"
