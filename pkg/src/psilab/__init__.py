"""Numerical checks for pseudodifferential energy estimates under a sign-change condition."""
import os as _os

# Thread count for the BLAS/LAPACK backends; must be set before numpy loads.
_threads = _os.environ.get("PSILAB_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ[_var] = _threads

from .errors import (AliasingError, ConfigError, ConvergenceError, GridError,  # noqa: E402
                     HypothesisError, PsiConditionError, PsilabError, ResolutionError)
from .grid import PhaseGrid, SampledSymbol, SymbolFamily, TimeGrid  # noqa: E402
from .quantize import SpaceGrid, weyl_quantize, wick_quantize  # noqa: E402
from .report import CheckEntry, VerificationReport  # noqa: E402

__version__ = "0.1.0"

__all__ = [
    "AliasingError", "CheckEntry", "ConfigError", "ConvergenceError", "GridError",
    "HypothesisError", "PhaseGrid", "PsiConditionError", "PsilabError", "ResolutionError",
    "SampledSymbol", "SpaceGrid", "SymbolFamily", "TimeGrid", "VerificationReport",
    "weyl_quantize", "wick_quantize",
]
