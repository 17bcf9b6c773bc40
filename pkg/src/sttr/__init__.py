"""Cooperative target motion estimation from bearing and bearing-rate measurements."""

__version__ = "0.1.0"
