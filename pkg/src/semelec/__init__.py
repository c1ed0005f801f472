"""One-dimensional semiconductor-electrolyte drift-diffusion-Poisson simulator."""

from .kernels import BACKEND

__all__ = ["BACKEND"]
__version__ = "0.1.0"
