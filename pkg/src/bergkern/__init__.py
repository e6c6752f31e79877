"""Bergman kernel asymptotics on model line bundles."""

__version__ = "0.1.0"
