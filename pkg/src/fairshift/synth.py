"""Synthetic censored-population scenarios with exact oracles.

The loan scenario: two equally likely groups with unit-variance Gaussian
covariates centered at (1, 0) and (0, 1); the favorable outcome is logistic
in the covariates with group-specific slopes (1, -1) and (1.25, -1); rows are
screened into the labeled data with the same group-specific logistic
probability, so inclusion depends on covariates and group but not on the
outcome; the target population is everyone.  The oracle bundle carries each
row's class-aware score, the class-blind mixture score (posterior group
membership follows from the two Gaussian densities), and the true inclusion
propensity.

The quantile-censoring scenario rewrites the inclusion flag of an existing
sample: rows stay screened-in only when one chosen feature exceeds a low
quantile of its target-population distribution, the pattern of a data source
that drops the lowest-income records.

All randomness is counter-based on (seed, row, stream): regeneration is
bit-identical and independent of row order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, ndtri

from ._kernels import counter_uniforms
from .dataset import PopulationSample
from .errors import QuantileUndefinedError, ShapeError

_STREAM_X1 = 1
_STREAM_X2 = 2
_STREAM_GROUP = 3
_STREAM_OUTCOME = 4
_STREAM_INCLUDE = 5


@dataclass(frozen=True)
class LoanScenarioSpec:
    n: int = 100_000
    seed: int = 20_240_501
    mean_0: tuple = (1.0, 0.0)
    mean_1: tuple = (0.0, 1.0)
    beta_0: tuple = (1.0, -1.0)
    beta_1: tuple = (1.25, -1.0)
    share_1: float = 0.5
    censor_outcomes: bool = False  # blank labels on screened-out rows


@dataclass
class OracleBundle:
    """Per-row ground truth; aligned with the emitted sample."""

    score_aware: np.ndarray   # P(Y=1 | x, a)
    score_blind: np.ndarray   # P(Y=1 | x)
    propensity: np.ndarray    # P(z=1 | x, a)
    group_posterior_1: np.ndarray = field(default=None, repr=False)


def _class_posterior_1(x: np.ndarray, spec: LoanScenarioSpec) -> np.ndarray:
    """P(A=1 | x) for the two-Gaussian covariate mixture."""
    m0 = np.asarray(spec.mean_0)
    m1 = np.asarray(spec.mean_1)
    log_odds = (x @ (m1 - m0) + 0.5 * (m0 @ m0 - m1 @ m1)
                + np.log(spec.share_1 / (1.0 - spec.share_1)))
    return expit(log_odds)


def loan_oracle(x: np.ndarray, group: np.ndarray,
                spec: LoanScenarioSpec) -> OracleBundle:
    """Analytic scores and propensities at arbitrary points of the scenario."""
    b0 = np.asarray(spec.beta_0)
    b1 = np.asarray(spec.beta_1)
    s0 = expit(x @ b0)
    s1 = expit(x @ b1)
    aware = np.where(group == 1, s1, s0)
    post1 = _class_posterior_1(x, spec)
    blind = (1.0 - post1) * s0 + post1 * s1
    return OracleBundle(aware, blind, aware.copy(), post1)


def generate_loan(spec: LoanScenarioSpec = LoanScenarioSpec()):
    """Simulate the loan scenario; returns (sample, oracle).

    The sample keeps every true outcome unless ``censor_outcomes`` is set;
    training realism comes from using only the z=1 view, while the fully
    labeled t=1 view serves as ground truth for audits.
    """
    n = int(spec.n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        empty = PopulationSample.empty(("accounts", "delinquencies"))
        return empty, OracleBundle(np.empty(0), np.empty(0), np.empty(0))
    idx = np.arange(n, dtype=np.uint64)
    z1 = ndtri(counter_uniforms(spec.seed, idx, _STREAM_X1))
    z2 = ndtri(counter_uniforms(spec.seed, idx, _STREAM_X2))
    group = (counter_uniforms(spec.seed, idx, _STREAM_GROUP) < spec.share_1).astype(np.int64)
    means = np.where(group[:, None] == 1, np.asarray(spec.mean_1), np.asarray(spec.mean_0))
    x = means + np.column_stack([z1, z2])

    oracle = loan_oracle(x, group, spec)
    y = (counter_uniforms(spec.seed, idx, _STREAM_OUTCOME) < oracle.score_aware)
    z = (counter_uniforms(spec.seed, idx, _STREAM_INCLUDE) < oracle.propensity)

    outcome = y.astype(np.float64)
    if spec.censor_outcomes:
        outcome = np.where(z, outcome, np.nan)
    sample = PopulationSample.from_arrays(
        x, group, outcome, z.astype(np.int8), np.ones(n, dtype=np.int8),
        feature_names=("accounts", "delinquencies"))
    return sample, oracle


@dataclass(frozen=True)
class QuantileCensorSpec:
    feature: int = 0
    q: float = 0.1


def generate_quantile_censoring(spec: QuantileCensorSpec,
                                sample: PopulationSample) -> PopulationSample:
    """Overwrite inclusion: keep targeted rows whose feature exceeds the
    q-quantile of that feature among targeted rows."""
    if not 0.0 < spec.q < 1.0:
        raise ValueError("censoring quantile must lie strictly inside (0, 1)")
    if not 0 <= spec.feature < sample.covariates.shape[1]:
        raise ShapeError(f"feature index {spec.feature} out of range")
    values = sample.covariates[:, spec.feature]
    targeted = sample.targeted == 1
    pool = values[targeted]
    if pool.size == 0 or np.min(pool) == np.max(pool):
        raise QuantileUndefinedError(
            f"feature {spec.feature} is constant on the target rows; "
            "its quantile threshold is undefined")
    n_censor = int(np.floor(spec.q * pool.size))
    if n_censor == 0:
        z = targeted.astype(np.int8)
    else:
        threshold = np.partition(pool, n_censor - 1)[n_censor - 1]
        z = (targeted & (values > threshold)).astype(np.int8)
    if np.any((z == 1) & np.isnan(sample.outcome)):
        raise ShapeError(
            "quantile censoring would screen in rows with missing outcomes; "
            "provide a fully labeled base sample")
    return PopulationSample.from_arrays(
        sample.covariates, sample.decode_groups(), sample.outcome, z,
        sample.targeted, feature_names=sample.feature_names)


# ---------------------------------------------------------------------------
# oracle sidecar CSV
# ---------------------------------------------------------------------------

ORACLE_HEADER = ("row", "true_score_blind", "true_score_aware", "true_propensity")


def write_oracle_csv(oracle: OracleBundle, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(ORACLE_HEADER)
        for i in range(oracle.score_blind.shape[0]):
            writer.writerow([i, repr(float(oracle.score_blind[i])),
                             repr(float(oracle.score_aware[i])),
                             repr(float(oracle.propensity[i]))])


def load_oracle_csv(path) -> OracleBundle:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != ORACLE_HEADER:
            raise ShapeError(f"{path}: unexpected oracle sidecar header {header}")
        rows = [(float(r[1]), float(r[2]), float(r[3])) for r in reader]
    arr = np.asarray(rows, dtype=np.float64).reshape(-1, 3)
    return OracleBundle(arr[:, 1], arr[:, 0], arr[:, 2])
