"""Numerical nonlinear Fourier transform for the focusing Zakharov-Shabat system."""

__version__ = "0.1.0"

from .signal import PulseSpec, Signal, TimeGrid, generate, make_grid, auto_window, conserved
from .steppers import Method, propagate, propagate_many
from .continuous import LambdaMesh, continuous_spectrum
from .search import NewtonOptions, find_eigenvalues, newton_refine
from .matrix import matrix_eigenvalues
from .nls import PropagationPlan, ssf_propagate

__all__ = [
    "PulseSpec", "Signal", "TimeGrid", "generate", "make_grid", "auto_window", "conserved",
    "Method", "propagate", "propagate_many", "LambdaMesh", "continuous_spectrum",
    "NewtonOptions", "find_eigenvalues", "newton_refine", "matrix_eigenvalues",
    "PropagationPlan", "ssf_propagate",
]
