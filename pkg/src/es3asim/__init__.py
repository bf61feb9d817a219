"""Seeded discrete-event simulator of multi-domain security orchestration."""

__version__ = "0.1.0"
