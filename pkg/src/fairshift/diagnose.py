"""Residual-unfairness diagnostics.

Everything here interrogates one question: a policy equalizing rates on the
screened-in training population - does it stay fair on the target
population, and if not, which group pays?  The tools are

* the inequity matrix (pairwise TPR differences under an event);
* an exact identity linking target inequity to the per-group gaps between
  training and target score CDFs, checked over every achievable rate;
* stochastic-dominance ("benefit of the doubt") certificates: orderings of
  the per-group training/target CDFs that force the sign of the residual
  inequity, in strong (full dominance) and weak (interval) forms;
* a null check for censoring that depends on the group alone, which provably
  leaves inequity unchanged between training and target;
* a weight-ratio direction test: among screened-in positives, comparing mean
  propensity ratios of accepted vs rejected rows predicts the direction of
  the training-to-target TPR shift.

Every diagnostic here conditions on the favorable label.  The mirrored
analysis on true negative rates (disparate scrutiny of the unfavorable
label) needs no separate code path: relabel outcomes y -> 1 - y and negate
the score before calling the same functions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import PopulationSample, SampleView, view as make_view
from .errors import EndowmentError, NotEqualOpportunityError, UndefinedRateError
from .policy import GroupPolicy, expected_tprs
from .rates import (
    ConditionalCDF,
    DeltaCurve,
    conditional_cdf,
    invert_cdf_many,
    merged_grid_with_midpoints,
    pointwise_geq,
    strictly_above_somewhere,
    tail_with_atoms,
)
from .reweight import WeightFunction, weighted_rate

EQUAL_TPR_TOL = 1e-9


# ---------------------------------------------------------------------------
# inequity of opportunity
# ---------------------------------------------------------------------------


@dataclass
class InequityMatrix:
    """Pairwise expected-TPR differences under one event.

    ``values[i, j]`` is TPR(groups[i]) - TPR(groups[j]); positive entries
    mean group j is disadvantaged relative to group i.  Antisymmetry and the
    zero diagonal hold exactly by construction.
    """

    groups: list[int]
    values: np.ndarray
    event: str

    def entry(self, a: int, b: int) -> float:
        return float(self.values[self.groups.index(a), self.groups.index(b)])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def to_dict(self) -> dict:
        return {"event": self.event, "groups": [int(g) for g in self.groups],
                "values": self.values.tolist()}


def _matrix_from_tprs(groups, tprs, event) -> InequityMatrix:
    t = np.asarray(tprs, dtype=np.float64)
    return InequityMatrix(list(groups), t[:, None] - t[None, :], event)


def inequity(policy: GroupPolicy, view: SampleView, scores,
             weights=None) -> InequityMatrix:
    """Inequity of opportunity of the policy on the view; needs positives
    in every group, negatives are irrelevant."""
    tprs = expected_tprs(policy, view, scores, weights)
    groups = sorted(tprs)
    return _matrix_from_tprs(groups, [tprs[g] for g in groups], view.event)


# ---------------------------------------------------------------------------
# the shift identity
# ---------------------------------------------------------------------------


@dataclass
class ShiftIdentityCheck:
    """Both sides of: target inequity equals the difference of the groups'
    training-vs-target TPR gaps at the policy's operating points."""

    epsilon_direct: InequityMatrix
    epsilon_via_delta: InequityMatrix
    residual: float


def _policy_fnr(rule, cdf: ConditionalCDF) -> float:
    """Expected FNR of a (possibly two-point) rule under one CDF."""
    tail = tail_with_atoms(cdf, np.array([rule.theta]), np.array([rule.q]))[0]
    if rule.w > 0.0:
        tail2 = tail_with_atoms(cdf, np.array([rule.theta2]), np.array([rule.q2]))[0]
        tail = (1.0 - rule.w) * tail + rule.w * tail2
    return 1.0 - tail


def inequity_shift_identity(policy: GroupPolicy, train_view: SampleView,
                            target_view: SampleView, scores,
                            tol: float = EQUAL_TPR_TOL) -> ShiftIdentityCheck:
    """Check the identity for one derived equal-opportunity policy.

    The direct side measures target inequity from row averages; the other
    side evaluates the training and target CDFs at the policy's operating
    points.  The policy must equalize training TPRs (within ``tol``); for
    randomized rules the CDF gaps are taken at the rule's expected FNR,
    which reduces to the plain CDF difference at the threshold whenever the
    threshold carries no atom randomization.
    """
    train_tprs = expected_tprs(policy, train_view, scores)
    groups = sorted(train_tprs)
    tprs = np.array([train_tprs[g] for g in groups])
    if np.max(tprs) - np.min(tprs) > tol:
        raise NotEqualOpportunityError(
            f"training TPRs differ by {np.max(tprs) - np.min(tprs):.3e}; "
            "the identity is only defined for equal-opportunity policies")
    direct = inequity(policy, target_view, scores)

    deltas = []
    for g in groups:
        rule = policy.rule_for(g)
        f_train = conditional_cdf(train_view, scores, g, 1)
        f_target = conditional_cdf(target_view, scores, g, 1)
        deltas.append(_policy_fnr(rule, f_train) - _policy_fnr(rule, f_target))
    deltas = np.asarray(deltas)
    via = InequityMatrix(groups, deltas[:, None] - deltas[None, :],
                         target_view.event)
    residual = float(np.max(np.abs(via.values - direct.values)))
    return ShiftIdentityCheck(direct, via, residual)


# ---------------------------------------------------------------------------
# breakpoint sweeps
# ---------------------------------------------------------------------------


@dataclass
class BreakpointSweep:
    """Equal-opportunity policies at every achievable training rate.

    Arrays are indexed (breakpoint, group-position); ``groups`` fixes the
    group order.  ``tpr_train`` recomputes each policy's training TPR (equal
    to ``rho`` up to float round-off), so the identity residual
    ``|delta-side - direct-side|`` reduces to the spread of the recomputed
    training TPRs.
    """

    groups: list[int]
    rho: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    tpr_train: np.ndarray
    tpr_target: np.ndarray

    def _col(self, g: int) -> int:
        return self.groups.index(g)

    def inequity_target(self, a: int, b: int) -> np.ndarray:
        return self.tpr_target[:, self._col(a)] - self.tpr_target[:, self._col(b)]

    def delta_gap(self, a: int, b: int) -> np.ndarray:
        """Delta-curve side of the identity, per breakpoint."""
        da = self.tpr_target[:, self._col(a)] - self.tpr_train[:, self._col(a)]
        db = self.tpr_target[:, self._col(b)] - self.tpr_train[:, self._col(b)]
        return da - db

    def identity_residual(self, a: int, b: int) -> np.ndarray:
        return np.abs(self.delta_gap(a, b) - self.inequity_target(a, b))


def sweep_breakpoint_policies(scores, train_view: SampleView,
                              target_view: SampleView, weights_train=None,
                              weights_target=None) -> BreakpointSweep:
    """Derive the equal-opportunity policy at every training breakpoint and
    evaluate it on both populations, fully vectorized."""
    parent_groups = range(1, train_view.parent.n_groups + 1)
    train_cdfs = {}
    target_cdfs = {}
    for g in parent_groups:
        train_cdfs[g] = conditional_cdf(train_view, scores, g, 1, weights_train)
        target_cdfs[g] = conditional_cdf(target_view, scores, g, 1, weights_target)
    groups = sorted(train_cdfs)
    rho = np.unique(np.concatenate(
        [np.array([1.0])] + [1.0 - train_cdfs[g].cumulative for g in groups]))
    B, m = rho.shape[0], len(groups)
    theta = np.empty((B, m))
    q = np.empty((B, m))
    tpr_train = np.empty((B, m))
    tpr_target = np.empty((B, m))
    for j, g in enumerate(groups):
        th, frac = invert_cdf_many(train_cdfs[g], 1.0 - rho)
        theta[:, j] = th
        q[:, j] = frac
        tpr_train[:, j] = tail_with_atoms(train_cdfs[g], th, frac)
        tpr_target[:, j] = tail_with_atoms(target_cdfs[g], th, frac)
    return BreakpointSweep(groups, rho, theta, q, tpr_train, tpr_target)


def nontrivial_breakpoints(sweep: BreakpointSweep, scores,
                           train_view: SampleView) -> np.ndarray:
    """Mask of policies leaving, in every group, at least one score strictly
    above the threshold and one at or below it."""
    mask = np.ones(sweep.rho.shape[0], dtype=bool)
    s = train_view.take(np.asarray(scores, dtype=np.float64))
    for j, g in enumerate(sweep.groups):
        s_g = s[train_view.group == g]
        lo, hi = np.min(s_g), np.max(s_g)
        mask &= (sweep.theta[:, j] >= lo) & (sweep.theta[:, j] < hi)
    return mask


# ---------------------------------------------------------------------------
# benefit-of-the-doubt certificates
# ---------------------------------------------------------------------------


@dataclass
class DbdFinding:
    """Outcome of a disparate-benefit-of-the-doubt check."""

    kind: str                       # strong | strong_strict | weak_interval |
                                    # weak_endowed_interval | none
    advantaged: int | None = None
    disadvantaged: int | None = None
    interval: tuple | None = None   # (theta_lo, theta_hi), open
    tpr_range: tuple | None = None  # training TPRs whose policies land inside
    detail: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "advantaged": None if self.advantaged is None else int(self.advantaged),
            "disadvantaged": (None if self.disadvantaged is None
                              else int(self.disadvantaged)),
            "interval": None if self.interval is None else list(self.interval),
            "tpr_range": None if self.tpr_range is None else list(self.tpr_range),
            "detail": self.detail,
        }


def _delta_nonzero_interior(train: ConditionalCDF, target: ConditionalCDF) -> bool:
    """True when the train-target CDF gap is nonzero on all of (0, 1).

    The gap is a step function; probing every support point plus 0 observes
    each constant piece intersecting (0, 1).  Scores are assumed in [0, 1].
    """
    grid = np.unique(np.concatenate([[0.0], train.support, target.support]))
    grid = grid[grid < 1.0]
    gaps = train.evaluate(grid) - target.evaluate(grid)
    return bool(np.all(gaps != 0.0))


def check_strong_dbd(f_a_train: ConditionalCDF, f_a_target: ConditionalCDF,
                     f_b_train: ConditionalCDF, f_b_target: ConditionalCDF,
                     eps: float = 0.0) -> DbdFinding:
    """Strong certificate: one group's screened-in positives score overall
    lower than its target positives while the other group's score overall
    higher; then every training-equalized policy carries nonnegative target
    inequity against the second group, strictly positive somewhere.

    Both orientations are tried; the strict variant additionally requires
    both gaps nonzero throughout (0, 1), which upgrades "somewhere" to
    "for every nontrivial policy".
    """
    for adv, dis, fa_tr, fa_tg, fb_tr, fb_tg in (
        (f_a_train.group, f_b_train.group, f_a_train, f_a_target, f_b_train, f_b_target),
        (f_b_train.group, f_a_train.group, f_b_train, f_b_target, f_a_train, f_a_target),
    ):
        adv_ok = pointwise_geq(fa_tr, fa_tg, eps)      # advantaged gap >= 0
        dis_ok = pointwise_geq(fb_tg, fb_tr, eps)      # disadvantaged gap <= 0
        some_strict = (strictly_above_somewhere(fa_tr, fa_tg, eps)
                       or strictly_above_somewhere(fb_tg, fb_tr, eps))
        if adv_ok and dis_ok and some_strict:
            strict = (_delta_nonzero_interior(fa_tr, fa_tg)
                      and _delta_nonzero_interior(fb_tr, fb_tg))
            return DbdFinding(kind="strong_strict" if strict else "strong",
                              advantaged=adv, disadvantaged=dis)
    return DbdFinding(kind="none")


def _train_tpr_image(interval, f_a_train: ConditionalCDF,
                     f_b_train: ConditionalCDF):
    """Training TPRs whose equal-opportunity thresholds all fall inside the
    open interval: rates below min(1 - F(theta_lo)) and at or above
    max(1 - F(theta_hi-))."""
    lo, hi = interval
    tpr_hi = min(1.0 - f_a_train.evaluate(lo), 1.0 - f_b_train.evaluate(lo))
    tpr_lo = max(1.0 - f_a_train.evaluate_left(hi), 1.0 - f_b_train.evaluate_left(hi))
    if tpr_lo >= tpr_hi:
        return None
    return (float(tpr_lo), float(tpr_hi))


def find_weak_dbd_interval(delta_a: DeltaCurve, delta_b: DeltaCurve,
                           mode: str = "strict", endowment_check=None,
                           slack: float = 0.0) -> DbdFinding:
    """Widest open threshold interval certifying weak disparate benefit of
    the doubt for group b relative to group a.

    strict mode: every gap value of group a inside the interval strictly
    exceeds every gap value of group b there.  endowed mode: the comparison
    is only required for threshold pairs ordered theta_a >= theta_b, valid
    when group a's screened-in positives score-dominate group b's (verified
    from the training CDFs; override with ``endowment_check``).  ``slack``
    strengthens the strict inequalities for noisy data.
    """
    if mode not in ("strict", "endowed"):
        raise ValueError(f"unknown mode {mode!r}")
    grid = merged_grid_with_midpoints(delta_a.left, delta_a.right,
                                      delta_b.left, delta_b.right)
    if grid.shape[0] < 2:
        return DbdFinding(kind="none")
    da = delta_a.evaluate(grid)
    db = delta_b.evaluate(grid) + slack
    if mode == "strict":
        i, e = _kernels.widest_strict_window(grid, da, db)
        kind = "weak_interval"
    else:
        f_a_train, f_b_train = (endowment_check if endowment_check is not None
                                else (delta_a.left, delta_b.left))
        if not pointwise_geq(f_b_train, f_a_train):
            raise EndowmentError(
                "endowed mode requires group a's training positives to "
                "score-dominate group b's")
        i, e = _kernels.widest_ordered_window(grid, da, db)
        kind = "weak_endowed_interval"
    if i < 0:
        return DbdFinding(kind="none")
    interval = (float(grid[i]), float(grid[e]))
    tpr_range = _train_tpr_image(interval, delta_a.left, delta_b.left)
    return DbdFinding(kind=kind, advantaged=delta_a.group,
                      disadvantaged=delta_b.group, interval=interval,
                      tpr_range=tpr_range,
                      detail={"grid_points": int(grid.shape[0]),
                              "slack": slack})


# ---------------------------------------------------------------------------
# group-only censoring null
# ---------------------------------------------------------------------------


@dataclass
class CensoringNullCheck:
    epsilon_train: InequityMatrix
    epsilon_target: InequityMatrix
    max_gap: float


def group_censoring_null_check(sample: PopulationSample, policy: GroupPolicy,
                               scores, weights=None) -> CensoringNullCheck:
    """Measure the training-vs-target inequity gap.

    When inclusion and targeting depend on the group alone (a mechanism the
    caller asserts; this operation measures, it does not verify), the two
    matrices agree.  Covariate-dependent censoring generically breaks the
    equality - that gap is the residual unfairness itself.
    """
    eps_train = inequity(policy, make_view(sample, "z=1"), scores, weights)
    eps_target = inequity(policy, make_view(sample, "t=1"), scores, weights)
    gap = float(np.max(np.abs(eps_train.values - eps_target.values)))
    return CensoringNullCheck(eps_train, eps_target, gap)


# ---------------------------------------------------------------------------
# weight-ratio direction test
# ---------------------------------------------------------------------------


@dataclass
class RatioDirectionTest:
    group: int
    mean_fn: float
    mean_tp: float
    tpr_train: float
    tpr_target_estimate: float
    predicted_direction: int
    observed_direction: int

    def to_dict(self) -> dict:
        return {
            "group": int(self.group),
            "mean_weight_false_negatives": self.mean_fn,
            "mean_weight_true_positives": self.mean_tp,
            "tpr_train": self.tpr_train,
            "tpr_target_estimate": self.tpr_target_estimate,
            "predicted_direction": self.predicted_direction,
            "observed_direction": self.observed_direction,
        }


def weight_ratio_direction_test(policy: GroupPolicy, train_view: SampleView,
                                scores, weight_fn: WeightFunction, group: int,
                                base_weights=None) -> RatioDirectionTest:
    """Compare mean propensity ratios between the accepted and rejected
    screened-in positives of one group.

    The sign of (mean over accepted) - (mean over rejected) predicts the
    sign of the training-to-target TPR shift; on exactly enumerated
    populations the two signs agree, on finite noisy samples they are
    reported, not asserted.  Randomized policies enter through their exact
    expected decisions.
    """
    sel = (train_view.group == group) & train_view.outcome_observed \
        & (train_view.outcome == 1)
    if not np.any(sel):
        raise UndefinedRateError(f"group {group} has no positives in training")
    s = train_view.take(np.asarray(scores, dtype=np.float64))[sel]
    ptilde = weight_fn.row_weights(train_view)[sel]
    if base_weights is None:
        b = np.ones(s.shape[0])
    else:
        b = train_view.take(np.asarray(base_weights, dtype=np.float64))[sel]
    d = policy.rule_for(group).expected_decision(s)
    mass_tp = np.sum(b * d)
    mass_fn = np.sum(b * (1.0 - d))
    if mass_tp <= 0.0 or mass_fn <= 0.0:
        raise UndefinedRateError(
            f"group {group} lacks expected true positives or false negatives "
            "under this policy")
    mean_tp = float(np.sum(b * ptilde * d) / mass_tp)
    mean_fn = float(np.sum(b * ptilde * (1.0 - d)) / mass_fn)
    tpr_train = float(mass_tp / (mass_tp + mass_fn))
    tpr_target = weighted_rate(policy, train_view, scores, weight_fn, group, 1,
                               base_weights=base_weights)
    return RatioDirectionTest(
        group=group,
        mean_fn=mean_fn,
        mean_tp=mean_tp,
        tpr_train=tpr_train,
        tpr_target_estimate=tpr_target,
        predicted_direction=int(np.sign(mean_tp - mean_fn)),
        observed_direction=int(np.sign(tpr_target - tpr_train)),
    )
