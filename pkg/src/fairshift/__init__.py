"""fairshift: audit and adjust decision policies learned from censored data.

Training data screened in by a historical policy is not the population a
deployed policy faces.  This package derives equal-opportunity and
equalized-odds threshold policies from a score, quantifies the residual
unfairness such policies keep on the target population, diagnoses the
censoring patterns that cause it, and corrects the derivation by propensity
ratio reweighting when target covariate data exists.
"""

__version__ = "0.1.0"

from ._kernels import active_backend
from .adjust import (
    LossSpec,
    derive_equal_opportunity,
    derive_equalized_odds,
    optimal_equal_opportunity,
)
from .dataset import PopulationSample, SampleView, load_csv, view, write_csv
from .diagnose import (
    BreakpointSweep,
    CensoringNullCheck,
    DbdFinding,
    InequityMatrix,
    RatioDirectionTest,
    ShiftIdentityCheck,
    check_strong_dbd,
    find_weak_dbd_interval,
    group_censoring_null_check,
    inequity,
    inequity_shift_identity,
    sweep_breakpoint_policies,
    weight_ratio_direction_test,
)
from .policy import (
    GroupPolicy,
    GroupRule,
    RatesTable,
    apply_policy,
    expected_rates,
    policy_from_json,
    policy_to_json,
)
from .rates import (
    BELOW_SUPPORT,
    ConditionalCDF,
    DeltaCurve,
    RocCurve,
    conditional_cdf,
    delta_curve,
    inverse_cdf,
    roc_curve,
)
from .reweight import (
    ConstantWeight,
    DensityRatioWeight,
    InversePropensityWeight,
    OracleWeight,
    TableWeight,
    WeightFunction,
    fit_density_ratio,
    fit_inclusion_propensity,
    weighted_conditional_cdf,
    weighted_rate,
)
from .scoring import (
    LogisticScoreModel,
    fit_logistic,
    model_from_json,
    model_to_json,
    predict_score,
    score_sample,
)
from .synth import (
    LoanScenarioSpec,
    OracleBundle,
    QuantileCensorSpec,
    generate_loan,
    generate_quantile_censoring,
)

__all__ = [name for name in dir() if not name.startswith("_")]
