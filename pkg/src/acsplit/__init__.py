"""Split-step and backward Euler time stepping for the stochastic Allen-Cahn equation."""

from .spectral import EigenBasis, make_basis
from .nonlinear import AllenCahn, ConvergenceError, jk_scalar
from .noise import CovarianceSpec, NoisePath, make_covariance, sample_path, coarsen
from .schemes import SchemeConfig, BESolver, Trajectory, StepFailure, run

__all__ = [
    "EigenBasis",
    "make_basis",
    "AllenCahn",
    "ConvergenceError",
    "jk_scalar",
    "CovarianceSpec",
    "NoisePath",
    "make_covariance",
    "sample_path",
    "coarsen",
    "SchemeConfig",
    "BESolver",
    "Trajectory",
    "StepFailure",
    "run",
]
