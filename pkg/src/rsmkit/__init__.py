"""Resource significance analysis for GPU hardware-counter profiles."""

__version__ = "0.1.0"
