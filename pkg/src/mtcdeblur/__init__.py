"""Bayesian and regularized image deblurring with marginal-then-conditional sampling."""

from .exceptions import (
    ConvergenceError,
    DegeneratePsfError,
    DegenerateSeriesError,
    DimensionError,
    DomainError,
    FlaggedModeError,
    GridTooSmallError,
    NoCornerError,
    ParameterError,
    SingularSystemError,
    UnsupportedPriorError,
)
from .kernels import BACKEND
from .model import (
    LaplacianOp,
    PeriodicModel,
    Psf,
    ZeroPaddedModel,
    apply_adjoint,
    apply_forward,
    apply_laplacian,
    extract_psf,
    sample_prior_noise,
)
from .regularize import build_lcurve, default_lambda_grid, lcurve_corner, solve_gendeconv
from .samplers import (
    Chain,
    GammaPrior,
    Hyper,
    LogDensityPrior,
    PeriodicProblem,
    gibbs_step,
    log_marginal,
    mtc_option1_step,
    mtc_option2_step,
    oneblock_step,
    run_chain,
    sample_conditional_x,
)
from .solvers import IterativeSolverConfig, iterative_solve
from .spectral import build_spectral_cache, build_tables, f_direct, f_fast, g_direct, g_fast

__version__ = "0.1.0"
