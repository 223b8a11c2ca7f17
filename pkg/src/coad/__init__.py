"""Constant-time goal-varying motion planning with compressed root-motion libraries."""

from __future__ import annotations

__version__ = "0.1.0"
