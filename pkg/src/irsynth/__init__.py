"""Raising loop-level kernels to tensor dialects by bottom-up enumerative synthesis."""

__version__ = "0.1.0"
