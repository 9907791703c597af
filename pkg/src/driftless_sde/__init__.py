"""Stability and boundary behaviour of driftless SDEs dX = sigma(X) dB."""

from .cantor import (
    CantorFunction,
    HolderExponentLambda,
    build_iterate,
    cantor_eval,
    holder_lambda,
    iterate_error_bound,
    sup01,
)
from .coefficients import (
    DiffusionSpec,
    HolderSpec,
    NakaoLeGallSpec,
    RegularityReport,
    check_regularity,
    default_grid,
    sup_distance,
)
from .errors import (
    ConfigError,
    DataError,
    DomainError,
    ParameterError,
    SDEError,
    SimulationError,
    SingularIntegrandError,
)
from .feller import BoundaryReport, Classification, FellerConfig, Limit, classify_boundary, mu_integral, nu_integral
from .fokker_planck import (
    DensityEstimate,
    TestFunction,
    WeakResidualReport,
    density_estimate,
    smooth_solution,
    weak_residual,
)
from .simulate import (
    CoupledErrorSample,
    MCEstimate,
    Path,
    SimConfig,
    Statistic,
    brownian_increments,
    coupled_batch,
    coupled_error,
    euler_maruyama,
    mc_estimate,
    terminal_mean,
)
from .stability import (
    RateExperimentResult,
    Regime,
    TheoreticalBound,
    YWFunction,
    cantor_family,
    fit_rate,
    run_rate_experiment,
    shift_family,
    steps_for_rule,
    theoretical_bound,
    yw_build,
    yw_sandwich_check,
)

__version__ = "0.1.0"
