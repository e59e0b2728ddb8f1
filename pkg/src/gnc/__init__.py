"""Generation-based network coding with overlap-aware decoding."""

__version__ = "0.1.0"
