"""High-dimensional threshold regression with debiased-Lasso inference.

The package fits two-regime linear models whose coefficients switch when a
threshold variable crosses an unknown cutoff, in designs where the number of
coefficients may exceed the sample size.  Estimation profiles a weighted Lasso
over a cutoff grid; inference debiases the fit through nodewise-regression
precision rows and provides coordinate-wise confidence intervals, joint tests,
heteroskedasticity- and autocorrelation-robust variants, threshold local
projections, and a reproducible simulation harness.
"""

from .design import (
    GramPair,
    RegimeGrid,
    Sample,
    ThresholdDesign,
    build_design,
    gram,
    make_grid,
    min_regime_count,
    objective,
)
from .errors import (
    BandwidthError,
    ContractError,
    DegenerateColumnError,
    DegenerateGridError,
    EstimationError,
    InputError,
    SingularBlockError,
    ThreshlassoError,
)
from .hac import (
    HacConfig,
    LongRunCov,
    auto_bandwidth,
    bartlett_weight,
    long_run_cov,
    psi_variance,
)
from .inference import (
    InferenceReport,
    JointTest,
    bonferroni_family_test,
    build_report,
    chi2_joint_test,
    confidence_interval,
    debias,
    sigma_xu_matrix,
    variance_of_contrast,
)
from .lp import IrfReport, LpResult, LpSpec, build_lp_design, lp_fit
from .montecarlo import (
    PRESETS,
    McConfig,
    McRecord,
    McReport,
    aggregate,
    gen_sample,
    make_value_grid,
    run_replication,
    run_simulation,
    write_outputs,
)
from .nodewise import (
    NodewiseFit,
    PrecisionEstimate,
    assemble_theta,
    kkt_residual,
    nodewise_fit,
)
from .search import ThresholdFit, profile_fit, refit_at
from .solver import (
    LassoConfig,
    LassoSolution,
    check_kkt,
    fit_weighted_lasso,
    nodewise_lambda,
    plugin_lambda,
    select_lambda,
    solve_gram,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthError",
    "ContractError",
    "DegenerateColumnError",
    "DegenerateGridError",
    "EstimationError",
    "GramPair",
    "HacConfig",
    "InferenceReport",
    "InputError",
    "IrfReport",
    "JointTest",
    "LassoConfig",
    "LassoSolution",
    "LongRunCov",
    "LpResult",
    "LpSpec",
    "McConfig",
    "McRecord",
    "McReport",
    "NodewiseFit",
    "PRESETS",
    "PrecisionEstimate",
    "RegimeGrid",
    "Sample",
    "SingularBlockError",
    "ThreshlassoError",
    "ThresholdDesign",
    "ThresholdFit",
    "aggregate",
    "assemble_theta",
    "auto_bandwidth",
    "bartlett_weight",
    "bonferroni_family_test",
    "build_design",
    "build_lp_design",
    "build_report",
    "check_kkt",
    "chi2_joint_test",
    "confidence_interval",
    "debias",
    "fit_weighted_lasso",
    "gen_sample",
    "gram",
    "kkt_residual",
    "long_run_cov",
    "lp_fit",
    "make_grid",
    "make_value_grid",
    "min_regime_count",
    "nodewise_fit",
    "nodewise_lambda",
    "objective",
    "plugin_lambda",
    "profile_fit",
    "psi_variance",
    "refit_at",
    "run_replication",
    "run_simulation",
    "select_lambda",
    "sigma_xu_matrix",
    "solve_gram",
    "variance_of_contrast",
    "write_outputs",
]
