"""Numerical experiments on the spectra of sparse random symmetric matrices."""

from .ensembles import EnsembleSpec, EntryDist
from .params import Params, derive_params, validate_regime
from .spectral import eigen_sym, gap_report

__all__ = ["EnsembleSpec", "EntryDist", "Params", "derive_params", "validate_regime",
           "eigen_sym", "gap_report"]
__version__ = "0.1.0"
