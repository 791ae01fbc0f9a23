"""Logistic score models fit by damped Newton iterations.

Fits are deterministic: zero initialization, a fixed tolerance on the
max-norm of the mean log-likelihood gradient, and a tiny ridge penalty that
keeps separable problems bounded.  The objective maximized is

    (1/n) sum_i [y_i log p_i + (1-y_i) log(1-p_i)] - (ridge/2) ||params||^2

with ``params`` including the intercept.  If the base ridge cannot reach the
gradient tolerance within the iteration budget the fit is retried with a
stronger ridge and the fallback is recorded in the model metadata.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dataset import SampleView
from .errors import DegenerateFitError, SchemaError, ShapeError

DEFAULT_RIDGE = 1e-6
GRAD_TOL = 1e-8
MAX_ITER = 500


@dataclass
class LogisticScoreModel:
    """Fitted score model; one parameter row per group when class-aware."""

    per_group: bool
    intercepts: np.ndarray      # (m,) or (1,)
    coefficients: np.ndarray    # (m, d) or (1, d)
    label_map: tuple
    ridge: float
    metadata: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return self.coefficients.shape[1]


def penalized_loglik(params: np.ndarray, X: np.ndarray, y: np.ndarray,
                     ridge: float) -> float:
    """Mean log-likelihood minus the ridge term; params = [intercept, coefs]."""
    eta = params[0] + X @ params[1:]
    # log sigma(eta) and log sigma(-eta) via the stable softplus form
    ll = np.mean(y * eta - np.logaddexp(0.0, eta))
    return float(ll - 0.5 * ridge * np.dot(params, params))


def penalized_gradient(params: np.ndarray, X: np.ndarray, y: np.ndarray,
                       ridge: float) -> np.ndarray:
    eta = params[0] + X @ params[1:]
    resid = y - expit(eta)
    g = np.empty(params.shape[0])
    g[0] = np.mean(resid)
    g[1:] = X.T @ resid / X.shape[0]
    return g - ridge * params


def _newton_fit(X: np.ndarray, y: np.ndarray, ridge: float,
                tol: float = GRAD_TOL, max_iter: int = MAX_ITER):
    n, d = X.shape
    params = np.zeros(d + 1)
    value = penalized_loglik(params, X, y, ridge)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        g = penalized_gradient(params, X, y, ridge)
        if np.max(np.abs(g)) <= tol:
            iterations -= 1
            break
        eta = params[0] + X @ params[1:]
        p = expit(eta)
        wdiag = p * (1.0 - p) / n
        Xa = np.column_stack([np.ones(n), X])
        H = Xa.T @ (Xa * wdiag[:, None]) + ridge * np.eye(d + 1)
        step = np.linalg.solve(H, g)
        # halve the step until the objective improves (Newton may overshoot
        # on near-separable data)
        scale = 1.0
        for _ in range(60):
            cand = params + scale * step
            cand_value = penalized_loglik(cand, X, y, ridge)
            if cand_value >= value:
                break
            scale *= 0.5
        params = params + scale * step
        value = cand_value
    g = penalized_gradient(params, X, y, ridge)
    return params, float(np.max(np.abs(g))), iterations


def fit_logistic_raw(X: np.ndarray, y: np.ndarray, ridge: float = DEFAULT_RIDGE,
                     tol: float = GRAD_TOL, max_iter: int = MAX_ITER):
    """Fit one logistic model on a raw design; returns (params, metadata).

    Shared by outcome scoring and inclusion-propensity fitting.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    classes = np.unique(y)
    if classes.shape[0] < 2:
        raise DegenerateFitError(
            f"outcome takes the single value {classes[0]!r}; no model is identified")
    used_ridge = ridge
    fallback = False
    params, gnorm, iters = _newton_fit(X, y, used_ridge, tol, max_iter)
    while gnorm > tol and used_ridge < 1.0:
        fallback = True
        used_ridge *= 100.0
        params, gnorm, iters = _newton_fit(X, y, used_ridge, tol, max_iter)
    meta = {"iterations": iters, "grad_max_norm": gnorm,
            "converged": gnorm <= tol, "ridge_fallback": fallback}
    return params, used_ridge, meta


def fit_logistic(training: SampleView, per_group: bool = False,
                 ridge: float = DEFAULT_RIDGE) -> LogisticScoreModel:
    """Fit the favorable-outcome score on a fully labeled view.

    ``per_group=False`` pools covariates over all rows (class-blind);
    ``per_group=True`` fits separate parameters inside each group.
    """
    if not np.all(training.outcome_observed):
        raise SchemaError("training view contains rows with missing outcomes")
    X = training.covariates
    y = training.outcome
    label_map = training.parent.label_map
    meta = {}
    if per_group:
        m = training.parent.n_groups
        d = X.shape[1]
        intercepts = np.empty(m)
        coefs = np.empty((m, d))
        used = ridge
        for g in range(1, m + 1):
            sel = training.group == g
            if not np.any(sel):
                raise DegenerateFitError(f"group {label_map[g - 1]!r} has no training rows")
            params, used_g, meta_g = fit_logistic_raw(X[sel], y[sel], ridge)
            intercepts[g - 1] = params[0]
            coefs[g - 1] = params[1:]
            used = max(used, used_g)
            meta[f"group_{g}"] = meta_g
        return LogisticScoreModel(True, intercepts, coefs, label_map, used, meta)
    params, used, meta = fit_logistic_raw(X, y, ridge)
    return LogisticScoreModel(False, params[:1], params[1:].reshape(1, -1),
                              label_map, used, meta)


def predict_score(model: LogisticScoreModel, covariates, group=None) -> np.ndarray:
    """Elementwise sigmoid(intercept + coefficients . x); group-specific
    parameters when the model is class-aware."""
    X = np.asarray(covariates, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != model.n_features:
        raise ShapeError(
            f"covariates have {X.shape[1]} features, model expects {model.n_features}")
    if model.per_group:
        if group is None:
            raise ShapeError("class-aware model requires group labels")
        grp = np.asarray(group)
        if grp.shape[0] != X.shape[0]:
            raise ShapeError("group labels misaligned with covariate rows")
        idx = grp.astype(np.int64) - 1
        if np.any(idx < 0) or np.any(idx >= model.intercepts.shape[0]):
            raise ShapeError("group code outside the model's label map")
        eta = model.intercepts[idx] + np.einsum("ij,ij->i", X, model.coefficients[idx])
    else:
        eta = model.intercepts[0] + X @ model.coefficients[0]
    return expit(eta)


def score_sample(model: LogisticScoreModel, sample) -> np.ndarray:
    """Full-sample score vector in the package's per-row convention."""
    return predict_score(model, sample.covariates, sample.group)


def model_to_dict(model: LogisticScoreModel) -> dict:
    return {
        "per_group": model.per_group,
        "intercepts": model.intercepts.tolist(),
        "coefficients": model.coefficients.tolist(),
        "label_map": list(model.label_map),
        "ridge": model.ridge,
        "metadata": model.metadata,
    }


def model_to_json(model: LogisticScoreModel) -> str:
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True)


def model_from_dict(doc: dict) -> LogisticScoreModel:
    return LogisticScoreModel(
        per_group=bool(doc["per_group"]),
        intercepts=np.asarray(doc["intercepts"], dtype=np.float64),
        coefficients=np.asarray(doc["coefficients"], dtype=np.float64),
        label_map=tuple(doc["label_map"]),
        ridge=float(doc["ridge"]),
        metadata=dict(doc.get("metadata", {})),
    )


def model_from_json(text: str) -> LogisticScoreModel:
    return model_from_dict(json.loads(text))
