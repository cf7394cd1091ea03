"""Squeezer → Kerr analyzer → homodyne measurement chain simulator."""

__version__ = "0.1.0"
