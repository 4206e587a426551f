"""Self-supervised image reconstruction with rotation/flip-canonical patch auto-encoders."""

__version__ = "0.1.0"
