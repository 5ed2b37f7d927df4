"""Dual-accelerometer activity recognition with DBA-synthesized feature selection."""

__version__ = "0.1.0"
