"""Empirical conditional score distributions and derived curves.

The conditional CDF of the score among label-y members of one group, under
one conditioning event, is the object every audit quantity is built from.
CDFs here are exact weighted step functions over the observed score values:
no binning, no interpolation, so identities between rates hold to machine
precision.

Weighted variants divide the selected weights by their maximum before
aggregating.  Besides conditioning the sums, this makes rescaling all weights
of a group by a common factor a numerical no-op whenever the products are
exact, and makes constant weights reproduce the unweighted result bit for
bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import SampleView
from .errors import ConditioningError, SchemaError, UndefinedRateError

#: Threshold strictly below every possible score ("accept everyone").
BELOW_SUPPORT = -np.inf

#: Threshold strictly above every possible score ("reject everyone").
ABOVE_SUPPORT = np.inf


@dataclass
class ConditionalCDF:
    """Weighted empirical CDF of scores in one (event, group, label) cell."""

    support: np.ndarray          # strictly increasing score values
    mass: np.ndarray             # positive weights, normalized to sum 1
    event: str
    group: int
    label: int
    cumulative: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.cumulative is None:
            cum = np.cumsum(self.mass)
            cum[-1] = 1.0  # guard the top atom against summation round-off
            self.cumulative = cum

    @property
    def n_atoms(self) -> int:
        return self.support.shape[0]

    def evaluate(self, theta) -> np.ndarray | float:
        """F(theta) = mass at or below theta (right-continuous)."""
        idx = np.searchsorted(self.support, theta, side="right")
        out = np.where(idx > 0, self.cumulative[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.isscalar(theta) else out

    def evaluate_left(self, theta) -> np.ndarray | float:
        """F(theta-) = mass strictly below theta."""
        idx = np.searchsorted(self.support, theta, side="left")
        out = np.where(idx > 0, self.cumulative[np.maximum(idx - 1, 0)], 0.0)
        return float(out) if np.isscalar(theta) else out

    def mass_at(self, theta) -> np.ndarray | float:
        """Atom mass exactly at theta (0 off the support)."""
        idx = np.searchsorted(self.support, theta, side="left")
        idx_c = np.minimum(idx, self.n_atoms - 1)
        hit = self.support[idx_c] == theta
        out = np.where(hit, self.mass[idx_c], 0.0)
        return float(out) if np.isscalar(theta) else out

    def inverse(self, q) -> float:
        """Generalized inverse inf{theta in support : F(theta) >= q}.

        q = 0 returns :data:`BELOW_SUPPORT`, the threshold under which every
        score is accepted.
        """
        if not 0.0 <= q <= 1.0:
            raise ValueError(f"quantile level {q} outside [0, 1]")
        if q <= 0.0:
            return BELOW_SUPPORT
        idx = int(np.searchsorted(self.cumulative, q, side="left"))
        return float(self.support[idx])

    def same_conditioning(self, other: "ConditionalCDF") -> bool:
        return self.group == other.group and self.label == other.label


def conditional_cdf(view: SampleView, scores, group: int, label: int,
                    weights=None) -> ConditionalCDF:
    """Weighted empirical CDF of ``scores`` over the view's (group, label)
    cell.  Censored-outcome rows never enter: conditioning on an unknown
    label is undefined."""
    s = view.take(np.asarray(scores, dtype=np.float64))
    grp = view.group
    observed = view.outcome_observed
    sel = (grp == group) & observed & (view.outcome == label)
    if not np.any(sel):
        raise UndefinedRateError(
            f"no rows with label {label} in group {group} under event '{view.event}'")
    s_sel = s[sel]
    if weights is None:
        w = np.ones(s_sel.shape[0])
    else:
        w = view.take(np.asarray(weights, dtype=np.float64))[sel]
        if np.any(w <= 0) or not np.all(np.isfinite(w)):
            raise SchemaError("weights must be positive and finite on selected rows")
        w = w / np.max(w)
    support, inv = np.unique(s_sel, return_inverse=True)
    raw = np.bincount(inv, weights=w)
    total = np.sum(raw)
    # normalize the running sum, not the atoms: for uniform weights the
    # partial sums are exact integers, so each F value rounds only once
    cum = np.cumsum(raw) / total
    cum[-1] = 1.0
    return ConditionalCDF(support, raw / total, view.event, group, label,
                          cumulative=cum)


def inverse_cdf(cdf: ConditionalCDF, q: float) -> float:
    """Function form of :meth:`ConditionalCDF.inverse`."""
    return cdf.inverse(q)


# ---------------------------------------------------------------------------
# vectorized CDF helpers shared by the policy sweeps
# ---------------------------------------------------------------------------


def invert_cdf_many(cdf: ConditionalCDF, qs: np.ndarray):
    """Generalized inverse and completing atom fraction for many levels.

    For each q returns (theta, frac) with theta = F^{-1}(q) and frac the
    share of theta's atom left *above* the level:
    F(theta) - frac * mass(theta) == q exactly (up to rounding), so a
    threshold rule at theta accepting the atom with probability frac has
    tail mass exactly 1 - q.  q <= 0 maps to the below-support sentinel.
    """
    qs = np.asarray(qs, dtype=np.float64)
    idx = np.searchsorted(cdf.cumulative, qs, side="left")
    idx = np.minimum(idx, cdf.n_atoms - 1)
    theta = cdf.support[idx]
    frac = (cdf.cumulative[idx] - qs) / cdf.mass[idx]
    pos = qs > 0.0
    theta = np.where(pos, theta, BELOW_SUPPORT)
    frac = np.where(pos, frac, 0.0)
    return theta, frac


def tail_with_atoms(cdf: ConditionalCDF, thetas: np.ndarray, fracs: np.ndarray) -> np.ndarray:
    """Expected tail mass 1 - F(theta) + frac * mass(theta), vectorized."""
    return 1.0 - cdf.evaluate(thetas) + fracs * cdf.mass_at(thetas)


# ---------------------------------------------------------------------------
# delta curves
# ---------------------------------------------------------------------------


@dataclass
class DeltaCurve:
    """Difference of a training and a target conditional CDF.

    Evaluates F_train(theta) - F_target(theta): the gap between the false
    negative rate a threshold shows on screened-in data and the rate it
    will show on the target population.
    """

    left: ConditionalCDF   # training (censored) population
    right: ConditionalCDF  # target population

    def __post_init__(self):
        if not self.left.same_conditioning(self.right):
            raise ConditioningError(
                "delta curve requires CDFs conditioned on the same (group, label)")

    @property
    def group(self) -> int:
        return self.left.group

    def evaluate(self, theta):
        return self.left.evaluate(theta) - self.right.evaluate(theta)

    def merged_support(self) -> np.ndarray:
        return np.unique(np.concatenate([self.left.support, self.right.support]))


def delta_curve(train_cdf: ConditionalCDF, target_cdf: ConditionalCDF) -> DeltaCurve:
    return DeltaCurve(train_cdf, target_cdf)


def merged_grid_with_midpoints(*cdfs: ConditionalCDF) -> np.ndarray:
    """Union of supports plus midpoints of adjacent gaps.

    Step curves over these supports are constant between consecutive grid
    points, so evaluating on this grid observes every value the curves take.
    """
    pts = np.unique(np.concatenate([c.support for c in cdfs]))
    if pts.shape[0] < 2:
        return pts
    mids = 0.5 * (pts[:-1] + pts[1:])
    return np.unique(np.concatenate([pts, mids]))


# ---------------------------------------------------------------------------
# stochastic order
# ---------------------------------------------------------------------------


def pointwise_geq(F: ConditionalCDF, G: ConditionalCDF, eps: float = 0.0) -> bool:
    """True when F(theta) >= G(theta) - eps on the merged support.

    This is the first-order dominance statement "F's population is overall
    smaller or equal to G's".  Step functions make the merged support a
    complete set of test points; ``eps`` > 0 gives the slack variant for
    noisy comparisons.
    """
    grid = np.unique(np.concatenate([F.support, G.support]))
    return bool(np.all(F.evaluate(grid) >= G.evaluate(grid) - eps))


def strictly_above_somewhere(F: ConditionalCDF, G: ConditionalCDF, eps: float = 0.0) -> bool:
    """True when F(theta) > G(theta) + eps at some merged-support point."""
    grid = np.unique(np.concatenate([F.support, G.support]))
    return bool(np.any(F.evaluate(grid) > G.evaluate(grid) + eps))


def cdfs_equal(F: ConditionalCDF, G: ConditionalCDF) -> bool:
    grid = np.unique(np.concatenate([F.support, G.support]))
    return bool(np.all(F.evaluate(grid) == G.evaluate(grid)))


# ---------------------------------------------------------------------------
# ROC curves
# ---------------------------------------------------------------------------


@dataclass
class RocCurve:
    """Operating points of threshold rules for one group under one event.

    ``points`` runs from (0, 0) (threshold above every score) to (1, 1)
    (accept everyone), one vertex per distinct score plus the endpoints;
    ``thresholds`` holds the matching threshold for each vertex, ending in
    the below-support sentinel.
    """

    points: np.ndarray       # (k, 2) array of (FPR, TPR)
    thresholds: np.ndarray   # (k,) descending thresholds
    event: str
    group: int

    def auc(self) -> float:
        return float(np.trapezoid(self.points[:, 1], self.points[:, 0]))


def roc_curve(view: SampleView, scores, group: int, weights=None) -> RocCurve:
    """ROC vertices from the group's positive- and negative-label CDFs."""
    pos = conditional_cdf(view, scores, group, 1, weights)
    neg = conditional_cdf(view, scores, group, 0, weights)
    return roc_from_cdfs(pos, neg)


def roc_from_cdfs(pos: ConditionalCDF, neg: ConditionalCDF) -> RocCurve:
    merged = np.unique(np.concatenate([pos.support, neg.support]))
    thresholds = np.concatenate([merged[::-1], [BELOW_SUPPORT]])
    tpr = 1.0 - pos.evaluate(thresholds[:-1])
    fpr = 1.0 - neg.evaluate(thresholds[:-1])
    points = np.column_stack([np.append(fpr, 1.0), np.append(tpr, 1.0)])
    return RocCurve(points, thresholds, pos.event, pos.group)


def export_curve_rows(kind: str, event: str, group, xs, ys):
    """(kind, event, group, x, y) rows for the CSV plot exports."""
    return [(kind, event, group, float(x), float(y)) for x, y in zip(xs, ys)]
