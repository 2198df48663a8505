"""Exact-law and Monte Carlo convergence studies for the theta-scheme applied
to the linear stochastic heat equation dX + AX dt = Q^{1/2} dW."""
from .covariance import (
    AdmissibilityError,
    CovarianceModel,
    admissible_gamma,
    diagonal_power,
    from_kernel,
    white,
)
from .fem1d import DiscreteSpace, build_p1_space, build_space, build_spectral_space
from .laws import (
    Functional,
    GaussianState,
    continuous_law,
    discrete_law,
    expect_functional,
    strong_error_sq,
    weak_error,
)
from .montecarlo import NoiseStream, SchemeSampler, coupled_refinement_error, mc_expect
from .spectral import SpectralModel, ThetaScheme, build_dirichlet_laplacian_1d
from .study import ConvergenceReport, StudyConfig, fit_rate, run_study

__version__ = "0.1.0"
