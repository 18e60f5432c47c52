"""Magnetic geodesics on the L2 sphere and the magnetic two-component Hunter-Saxton system."""
__version__ = "0.1.0"
