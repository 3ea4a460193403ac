"""Censored linear regression with unrestricted mean survival time estimation.

Slopes come from Gehan-weighted rank regression, the intercept from the mean
of a Kaplan-Meier fit to the residuals, with a Cox proportional hazards
comparator and a Monte Carlo engine for the reproduction studies.
"""

from .cox import BaselineHazard, CoxFit, breslow, cox_partial_loglik, fit_cox, predict_cox_mean
from .distributions import (
    EULER_GAMMA,
    CensoringLaw,
    CovariateLaw,
    ErrorLaw,
    ObservedRecord,
    SeedSpec,
    SubjectModel,
    law_mean,
    sample_error,
    sample_subject,
)
from .errors import (
    ConfigError,
    CoxFitError,
    DataError,
    DegenerateKMError,
    EstimationError,
    GehanSolverError,
    SimulationError,
)
from .gehan import (
    AftFit,
    DesignData,
    GehanScore,
    SolverReport,
    bootstrap_se,
    fit_aft,
    gehan_loss,
    gehan_score,
    gehan_score_detail,
    predict_aft,
    residuals,
    solve_gehan,
)
from .kernels import active_backend
from .simulation import (
    OlsFit,
    ReplicationResult,
    Scenario,
    SummaryTable,
    censoring_rate,
    mse_p,
    ols_fit,
    run_estimation_scenario,
    run_prediction_scenario,
    summary_csv_text,
    with_prediction_ratios,
)
from .survfit import (
    ResidualSample,
    RiskCounts,
    StepDistribution,
    TailDiagnostic,
    Truncation,
    curve_points,
    km_fit,
    mean_of,
    tail_diagnostic,
    truncation_time,
)

__version__ = "0.1.0"
