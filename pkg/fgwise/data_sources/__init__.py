"""
Data sources for building scattering data from Fourier-mode descriptions.
"""

from .fourier import FourierMode, build_boundary_metric, build_symmetric_field

__all__ = ["FourierMode", "build_boundary_metric", "build_symmetric_field"]
