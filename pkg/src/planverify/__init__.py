"""Deterministic air-ground combat simulator, hierarchical plan generation and Monte-Carlo plan verification."""

from __future__ import annotations

__version__ = "0.1.0"
