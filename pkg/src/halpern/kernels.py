"""Hot-loop backend selection.

Uses the compiled ``halpern._kernels`` extension when it imports, otherwise
the pure-Python twin. Set ``HALPERN_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("HALPERN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"

mopt_recursion = _impl.mopt_recursion
flat_recursion = _impl.flat_recursion
halpern_recursion = _impl.halpern_recursion
flat_general_recursion = _impl.flat_general_recursion
rho_sequences = _impl.rho_sequences
logistic = _impl.logistic
affine_residual = _impl.affine_residual
affine_residuals = _impl.affine_residuals

__all__ = [
    "BACKEND",
    "mopt_recursion",
    "flat_recursion",
    "halpern_recursion",
    "flat_general_recursion",
    "rho_sequences",
    "logistic",
    "affine_residual",
    "affine_residuals",
]
