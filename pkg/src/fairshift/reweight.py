"""Importance weights that move training-population averages to the target.

The estimand P(decide 1 | Y=y, A=a, target) is recovered from screened-in
rows alone by weighting each row with the propensity ratio
P(target | x, a) / P(screened-in | x, a), or anything proportional to it
within each group; proportionality constants cancel in every within-group
ratio.  This identification assumes inclusion and targeting are independent
of the outcome given (x, a) (missing-at-random); that assumption is a
documented contract of the callers, not something the code can test.

Three fitted forms are provided (inverse propensity, discretized density
ratio with Laplace smoothing and clipping, constant) plus escape hatches for
oracle evaluators and precomputed per-row tables.
"""

from __future__ import annotations

import json
import warnings

import numpy as np

from .dataset import PopulationSample, SampleView
from .errors import DegenerateFitError, EmptyViewError, SchemaError, UndefinedRateError
from .policy import GroupPolicy
from .rates import ConditionalCDF, conditional_cdf
from .scoring import fit_logistic_raw

DEFAULT_CLIP_CAP = 10.0
DEFAULT_ALPHA = 1.0
_FLOOR = np.finfo(np.float64).tiny


class WeightFunction:
    """Base class: positive per-row weights, optionally clipped at ``cap``."""

    form = "abstract"
    cap: float | None = None

    def _raw_row_weights(self, view: SampleView) -> np.ndarray:
        raise NotImplementedError

    def row_weights(self, view: SampleView) -> np.ndarray:
        """Weights for the view's rows, in (0, cap]."""
        w = self._raw_row_weights(view)
        if np.any(w < 0) or np.any(np.isnan(w)):
            raise SchemaError(f"{self.form} weights must be nonnegative and not NaN")
        if self.cap is None and not np.all(np.isfinite(w)):
            raise SchemaError(f"{self.form} produced infinite weights and clipping is off")
        hi = np.inf if self.cap is None else self.cap
        return np.clip(w, _FLOOR, hi)

    def clip_count(self, view: SampleView) -> int:
        if self.cap is None:
            return 0
        return int(np.count_nonzero(self._raw_row_weights(view) > self.cap))

    def params_dict(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"form": self.form, "cap": self.cap, **self.params_dict()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


class ConstantWeight(WeightFunction):
    form = "constant"

    def __init__(self, value: float = 1.0):
        if value <= 0:
            raise ValueError("constant weight must be positive")
        self.value = float(value)
        self.cap = None

    def _raw_row_weights(self, view: SampleView) -> np.ndarray:
        return np.full(view.n, self.value)

    def params_dict(self) -> dict:
        return {"value": self.value}


class OracleWeight(WeightFunction):
    """User-supplied evaluator ``fn(covariates, groups) -> positive weights``."""

    form = "oracle"

    def __init__(self, fn, cap: float | None = None):
        self.fn = fn
        self.cap = cap

    def _raw_row_weights(self, view: SampleView) -> np.ndarray:
        return np.asarray(self.fn(view.covariates, view.group), dtype=np.float64)

    def params_dict(self) -> dict:
        return {"note": "user-supplied evaluator; not serializable"}


class TableWeight(WeightFunction):
    """Precomputed full-sample-aligned weights (e.g. an oracle sidecar)."""

    form = "table"

    def __init__(self, values, cap: float | None = None):
        self.values = np.asarray(values, dtype=np.float64)
        self.cap = cap

    def _raw_row_weights(self, view: SampleView) -> np.ndarray:
        return view.take(self.values)

    def params_dict(self) -> dict:
        return {"values": self.values.tolist()}


class InversePropensityWeight(WeightFunction):
    """1 / P(screened-in | x, a) from a fitted logistic inclusion model.

    Valid when the sample is drawn from the target population and the
    labeled rows are the screened-in subset of it.
    """

    form = "inverse_propensity"

    def __init__(self, params: np.ndarray, n_groups: int, cap: float | None,
                 metadata: dict | None = None):
        self.params = np.asarray(params, dtype=np.float64)
        self.n_groups = int(n_groups)
        self.cap = cap
        self.metadata = metadata or {}

    def propensity(self, covariates: np.ndarray, groups: np.ndarray) -> np.ndarray:
        X = _design_with_groups(covariates, groups, self.n_groups)
        eta = self.params[0] + X @ self.params[1:]
        return 1.0 / (1.0 + np.exp(-eta))

    def _raw_row_weights(self, view: SampleView) -> np.ndarray:
        return 1.0 / self.propensity(view.covariates, view.group)

    def params_dict(self) -> dict:
        return {"params": self.params.tolist(), "n_groups": self.n_groups,
                "metadata": self.metadata}


def _design_with_groups(covariates: np.ndarray, groups: np.ndarray, m: int) -> np.ndarray:
    """Covariates augmented with group indicator columns (first group is the
    reference level absorbed by the intercept)."""
    n = covariates.shape[0]
    dummies = np.zeros((n, m - 1))
    for g in range(2, m + 1):
        dummies[:, g - 2] = groups == g
    return np.column_stack([covariates, dummies])


def fit_inclusion_propensity(sample: PopulationSample,
                             cap: float | None = DEFAULT_CLIP_CAP,
                             ridge: float = 1e-6) -> InversePropensityWeight:
    """Fit P(z=1 | x, a) by logistic regression on the full sample."""
    z = sample.included.astype(np.float64)
    if np.unique(z).shape[0] < 2:
        raise DegenerateFitError("inclusion flag is constant; propensity is unidentified")
    X = _design_with_groups(sample.covariates, sample.group, sample.n_groups)
    params, used_ridge, meta = fit_logistic_raw(X, z, ridge)
    meta = dict(meta, ridge=used_ridge)
    return InversePropensityWeight(params, sample.n_groups, cap, meta)


class CellMap:
    """Discretization of (covariates, group) into joint cells."""

    def n_cells(self) -> int:
        raise NotImplementedError

    def assign(self, covariates: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class FunctionCells(CellMap):
    """Caller-supplied cell assignment over a declared universe size."""

    def __init__(self, fn, n_cells: int):
        self._fn = fn
        self._n = int(n_cells)

    def n_cells(self) -> int:
        return self._n

    def assign(self, covariates: np.ndarray) -> np.ndarray:
        cells = np.asarray(self._fn(covariates), dtype=np.int64)
        if np.any(cells < 0) or np.any(cells >= self._n):
            raise SchemaError("cell assignment outside the declared universe")
        return cells


class QuantileCells(CellMap):
    """Default map: independent per-dimension quantile bins."""

    def __init__(self, edges: list[np.ndarray]):
        self.edges = edges

    @classmethod
    def fit(cls, covariates: np.ndarray, bins: int = 10) -> "QuantileCells":
        qs = np.linspace(0.0, 1.0, bins + 1)[1:-1]
        edges = [np.unique(np.quantile(covariates[:, j], qs))
                 for j in range(covariates.shape[1])]
        return cls(edges)

    def n_cells(self) -> int:
        out = 1
        for e in self.edges:
            out *= len(e) + 1
        return out

    def assign(self, covariates: np.ndarray) -> np.ndarray:
        cells = np.zeros(covariates.shape[0], dtype=np.int64)
        for j, e in enumerate(self.edges):
            cells = cells * (len(e) + 1) + np.searchsorted(e, covariates[:, j], side="right")
        return cells


class DensityRatioWeight(WeightFunction):
    """Smoothed cell-frequency ratio between target and training views."""

    form = "density_ratio"

    def __init__(self, cells: CellMap, ratio_table: dict, alpha: float,
                 cap: float | None, n_groups: int, uncovered: int = 0):
        self.cells = cells
        self.ratio_table = ratio_table  # (cell, group) -> weight
        self.alpha = alpha
        self.cap = cap
        self.n_groups = n_groups
        self.uncovered = uncovered
        keys = np.array([c * (n_groups + 1) + g for c, g in sorted(ratio_table)],
                        dtype=np.int64)
        vals = np.array([ratio_table[k] for k in sorted(ratio_table)], dtype=np.float64)
        self._keys = keys
        self._values = vals

    def _raw_row_weights(self, view: SampleView) -> np.ndarray:
        cells = self.cells.assign(view.covariates)
        enc = cells * (self.n_groups + 1) + view.group
        pos = np.searchsorted(self._keys, enc)
        pos_c = np.minimum(pos, len(self._keys) - 1)
        miss = (pos >= len(self._keys)) | (self._keys[pos_c] != enc)
        if np.any(miss):
            i = int(np.flatnonzero(miss)[0])
            raise SchemaError(
                f"no density ratio for cell {int(cells[i])}, group {int(view.group[i])}; "
                "the cell map must cover all scored rows")
        return self._values[pos_c]

    def params_dict(self) -> dict:
        hi = np.inf if self.cap is None else self.cap
        return {
            "alpha": self.alpha,
            "n_groups": self.n_groups,
            "uncovered_cells": self.uncovered,
            "table": [
                {"cell": c, "group": g,
                 "weight": float(np.clip(w, _FLOOR, hi)),
                 "clipped": bool(w > hi)}
                for (c, g), w in sorted(self.ratio_table.items())
            ],
        }


def fit_density_ratio(train_view: SampleView, target_view: SampleView,
                      cells: CellMap | None = None, alpha: float = DEFAULT_ALPHA,
                      cap: float | None = DEFAULT_CLIP_CAP,
                      bins: int = 10) -> DensityRatioWeight:
    """Estimate the (cell, group) frequency ratio target / training.

    Each count is Laplace-smoothed by ``alpha`` against the joint universe of
    K = n_cells * n_groups categories.  With ``alpha`` = 0, cells observed in
    the target but absent from training produce unbounded raw ratios; these
    are clipped to ``cap`` and counted as uncovered, with a warning.
    """
    if train_view.n == 0 or target_view.n == 0:
        raise EmptyViewError("density ratio requires nonempty training and target views")
    if cells is None:
        both = np.vstack([train_view.covariates, target_view.covariates])
        cells = QuantileCells.fit(both, bins=bins)
    m = train_view.parent.n_groups
    K = cells.n_cells() * m

    def counts(view_):
        ids = cells.assign(view_.covariates)
        table = {}
        for c, g in zip(ids, view_.group):
            key = (int(c), int(g))
            table[key] = table.get(key, 0) + 1
        return table

    n_train = counts(train_view)
    n_target = counts(target_view)
    keys = sorted(set(n_train) | set(n_target))
    N_train = train_view.n
    N_target = target_view.n
    ratio = {}
    uncovered = 0
    for key in keys:
        num = (n_target.get(key, 0) + alpha) / (N_target + alpha * K)
        den = (n_train.get(key, 0) + alpha) / (N_train + alpha * K)
        if den == 0.0:
            uncovered += 1
            ratio[key] = np.inf if cap is None else cap
        else:
            ratio[key] = num / den
    if uncovered:
        warnings.warn(
            f"{uncovered} (cell, group) categories appear in the target but not in "
            "training; their ratios were clipped to the cap", RuntimeWarning,
            stacklevel=2)
    return DensityRatioWeight(cells, ratio, alpha, cap, m, uncovered)


# ---------------------------------------------------------------------------
# reweighted estimators
# ---------------------------------------------------------------------------


def _cell_selection(view: SampleView, group: int, label: int):
    sel = (view.group == group) & view.outcome_observed & (view.outcome == label)
    if not np.any(sel):
        raise UndefinedRateError(
            f"no rows with label {label} in group {group} under event '{view.event}'")
    return sel


def weighted_rate(policy: GroupPolicy, train_view: SampleView, scores,
                  weight_fn: WeightFunction, group: int, label: int,
                  base_weights=None) -> float:
    """Estimate P(decide 1 | Y=label, A=group, target) from training rows.

    The numerator and denominator are both importance-weighted averages over
    the same screened-in (group, label) cell; the policy's randomization
    enters through its exact expected decision, never by sampling.
    """
    sel = _cell_selection(train_view, group, label)
    s = train_view.take(np.asarray(scores, dtype=np.float64))[sel]
    w = weight_fn.row_weights(train_view)[sel]
    if base_weights is not None:
        w = w * train_view.take(np.asarray(base_weights, dtype=np.float64))[sel]
    w = w / np.max(w)
    d = policy.rule_for(group).expected_decision(s)
    return float(np.sum(w * d) / np.sum(w))


def weighted_conditional_cdf(train_view: SampleView, scores,
                             weight_fn: WeightFunction, group: int, label: int,
                             base_weights=None) -> ConditionalCDF:
    """Conditional score CDF with per-row masses scaled by the weights;
    feeding this into policy derivation yields target-corrected policies."""
    w = weight_fn.row_weights(train_view)
    full = np.zeros(train_view.parent.n)
    full[train_view.indices] = w
    if base_weights is not None:
        full = full * np.asarray(base_weights, dtype=np.float64)
    return conditional_cdf(train_view, scores, group, label, weights=full)


def effective_sample_size(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=np.float64)
    return float(np.sum(w) ** 2 / np.sum(w * w))
