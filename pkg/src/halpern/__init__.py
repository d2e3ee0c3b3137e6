"""Minimax-optimal Halpern fixed-point iterations for Lipschitz maps."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
