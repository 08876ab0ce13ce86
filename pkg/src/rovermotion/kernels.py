"""Kernel backend selection: compiled extension if built, else pure Python."""
from __future__ import annotations

try:
    from rovermotion._track_cy import integrate_track

    BACKEND = "cython"
except ImportError:  # extension not built on this install
    from rovermotion._track_py import integrate_track

    BACKEND = "python"

__all__ = ["integrate_track", "BACKEND"]
