"""Dual-polarization FBMC, conventional FBMC/OQAM and CP-OFDM link simulation."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
