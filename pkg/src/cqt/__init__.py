"""Cavity-QED Bell-state preparation, Bell discrimination and atomic teleportation."""

__version__ = "0.1.0"
