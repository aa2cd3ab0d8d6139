"""Intrapulse radar modulation recognition from Cohen's-class spectrograms."""

from __future__ import annotations

from .const import VERSION

__version__ = VERSION
