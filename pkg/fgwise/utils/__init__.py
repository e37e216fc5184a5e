"""
Utility functions and helpers for the fgwise library.
"""

from .field_io import dump_field, load_field, top_fourier_modes

__all__ = ["dump_field", "load_field", "top_fourier_modes"]
