"""Warm-started sparse-grid stochastic collocation for parametrized elliptic PDEs."""

from .driver import RunConfig, compare, run_experiment
from .interpolant import VectorValuedInterpolant
from .sparse_grid import build_grid

__all__ = ["RunConfig", "VectorValuedInterpolant", "build_grid", "compare", "run_experiment"]
__version__ = "0.1.0"
