"""Steady 3D Euler flows without continuous symmetry by Lortz iteration."""
__version__ = "0.1.0"
