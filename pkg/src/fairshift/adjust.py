"""Derive fairness-constrained threshold policies from a score.

Equal opportunity: pick per-group thresholds (randomizing on the boundary
atom) so every group's expected TPR equals a common rate; optionally search
the finite grid of achievable rates for the one minimizing an expected
misclassification loss.  Equalized odds: intersect the groups' achievable
(FPR, TPR) regions - each the convex hull of its threshold operating points
together with the trivial corners - and realize the loss-minimizing common
point per group as a mixture of at most two randomized thresholds.

Evaluating with weights (from :mod:`fairshift.reweight`) turns the naive
screened-in derivation into the target-corrected one; the code path is
identical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import SampleView
from .errors import UndefinedRateError
from .policy import GroupPolicy, GroupRule
from .rates import (
    ABOVE_SUPPORT,
    BELOW_SUPPORT,
    ConditionalCDF,
    RocCurve,
    conditional_cdf,
    invert_cdf_many,
    roc_from_cdfs,
    tail_with_atoms,
)

_GEOM_EPS = 1e-12


@dataclass(frozen=True)
class LossSpec:
    """Linear misclassification costs; the exchange rate is fn_cost/fp_cost."""

    fn_cost: float
    fp_cost: float

    def __post_init__(self):
        if self.fn_cost < 0 or self.fp_cost < 0:
            raise ValueError("costs must be nonnegative")
        if self.fn_cost == 0 and self.fp_cost == 0:
            raise ValueError("costs must not both be zero")

    @classmethod
    def from_exchange_rate(cls, rate: float) -> "LossSpec":
        return cls(fn_cost=float(rate), fp_cost=1.0)


@dataclass
class GroupStats:
    """Per-group inputs of the derivations, under one evaluation view."""

    pos_cdf: ConditionalCDF
    neg_cdf: ConditionalCDF | None
    share: float   # weighted share of the group among labeled rows
    p1: float      # weighted P(Y=1 | group)


def group_stats(view: SampleView, scores, weights=None,
                require_negatives: bool = False) -> dict[int, GroupStats]:
    """Assemble CDFs and base rates for every group of the parent sample.

    Rows without an observed outcome are excluded throughout (their label
    cell is unknown).  Weighted shares and base rates use the same weights
    as the CDFs, so the loss is evaluated on the same population the rates
    are."""
    grp = view.group
    observed = view.outcome_observed
    outcome = view.outcome
    if weights is None:
        w_all = np.ones(view.n)
    else:
        w_all = view.take(np.asarray(weights, dtype=np.float64))
    w_all = np.where(observed, w_all, 0.0)
    if np.max(w_all) > 0:
        w_all = w_all / np.max(w_all)
    total = np.sum(w_all)
    stats = {}
    for g in range(1, view.parent.n_groups + 1):
        sel = (grp == g) & observed
        if not np.any(sel):
            raise UndefinedRateError(f"group {g} has no labeled rows under '{view.event}'")
        pos_cdf = conditional_cdf(view, scores, g, 1, weights)
        has_neg = np.any(sel & (outcome == 0))
        if require_negatives and not has_neg:
            raise UndefinedRateError(
                f"group {g} has no label-0 rows under '{view.event}'")
        neg_cdf = conditional_cdf(view, scores, g, 0, weights) if has_neg else None
        w_g = np.sum(w_all[sel])
        w_g1 = np.sum(w_all[sel & (outcome == 1)])
        stats[g] = GroupStats(pos_cdf, neg_cdf, float(w_g / total), float(w_g1 / w_g))
    return stats


# ---------------------------------------------------------------------------
# equal opportunity
# ---------------------------------------------------------------------------


def _rule_at_rate(pos_cdf: ConditionalCDF, rho: float) -> GroupRule:
    theta, frac = invert_cdf_many(pos_cdf, np.array([1.0 - rho]))
    return GroupRule(theta=float(theta[0]), q=float(frac[0]))


def derive_equal_opportunity(scores, view: SampleView, rho: float,
                             weights=None) -> GroupPolicy:
    """Policy with expected TPR exactly ``rho`` for every group on the view."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"target TPR {rho} outside [0, 1]")
    stats = group_stats(view, scores, weights)
    rules = {g: _rule_at_rate(st.pos_cdf, rho) for g, st in stats.items()}
    prov = {"criterion": "equal_opportunity", "rho": float(rho),
            "event": view.event, "weighted": weights is not None}
    return GroupPolicy("equal_opportunity", rules, prov)


def tpr_breakpoints(stats: dict[int, GroupStats]) -> np.ndarray:
    """All TPR values where some group's threshold sits exactly on an atom
    boundary (its rule needs no randomization there); includes 0 and 1."""
    pieces = [np.array([1.0])]
    for st in stats.values():
        pieces.append(1.0 - st.pos_cdf.cumulative)
    return np.unique(np.concatenate(pieces))


def _rate_representations(pos_cdf: ConditionalCDF, rhos: np.ndarray):
    """(theta, q) pairs realizing each rate, plus the high-threshold twin.

    When a rate sits exactly on an atom boundary (q = 0) the same expected
    TPR is also realized one support point higher with q = 1 (or by the
    reject-everyone sentinel above the top atom).  The twin never accepts
    more negatives and sometimes strictly fewer.
    """
    theta, frac = invert_cdf_many(pos_cdf, 1.0 - rhos)
    idx = np.searchsorted(pos_cdf.support, theta)
    up = idx + 1
    has_upper = up <= pos_cdf.n_atoms - 1
    theta_alt = np.where(has_upper,
                         pos_cdf.support[np.minimum(up, pos_cdf.n_atoms - 1)],
                         ABOVE_SUPPORT)
    q_alt = np.where(has_upper, 1.0, 0.0)
    alt_ok = (frac == 0.0) & np.isfinite(theta)
    return theta, frac, np.where(alt_ok, theta_alt, theta), \
        np.where(alt_ok, q_alt, frac), alt_ok


def optimal_equal_opportunity(scores, view: SampleView, loss: LossSpec,
                              weights=None):
    """Search the achievable-rate grid for the loss-minimizing common TPR.

    Between grid rates the expected loss is linear in the rate, and at grid
    rates both threshold representations of the rate are compared, so the
    returned policy is the exact loss minimum over all equal-opportunity
    policies.  Rate ties prefer the larger rate; representation ties prefer
    the canonical generalized-inverse form.  Returns (policy, rate).
    """
    stats = group_stats(view, scores, weights)
    rhos = tpr_breakpoints(stats)
    losses = np.zeros(rhos.shape[0])
    per_group = {}
    for g, st in stats.items():
        theta, frac, theta_alt, q_alt, alt_ok = \
            _rate_representations(st.pos_cdf, rhos)
        if st.neg_cdf is not None:
            fpr = tail_with_atoms(st.neg_cdf, theta, frac)
            fpr_alt = np.where(alt_ok,
                               tail_with_atoms(st.neg_cdf, theta_alt, q_alt),
                               fpr)
        else:
            fpr = np.zeros_like(rhos)
            fpr_alt = fpr
        use_alt = fpr_alt < fpr
        theta = np.where(use_alt, theta_alt, theta)
        frac = np.where(use_alt, q_alt, frac)
        fpr = np.minimum(fpr, fpr_alt)
        losses += st.share * (loss.fn_cost * st.p1 * (1.0 - rhos)
                              + loss.fp_cost * (1.0 - st.p1) * fpr)
        per_group[g] = (theta, frac)
    best = int(np.flatnonzero(losses == losses.min())[-1])
    rho = float(rhos[best])
    rules = {g: GroupRule(theta=float(theta[best]), q=float(frac[best]))
             for g, (theta, frac) in per_group.items()}
    prov = {"criterion": "equal_opportunity", "rho": rho, "event": view.event,
            "weighted": weights is not None, "optimized": True,
            "fn_cost": loss.fn_cost, "fp_cost": loss.fp_cost,
            "expected_loss": float(losses[best])}
    return GroupPolicy("equal_opportunity", rules, prov), rho


# ---------------------------------------------------------------------------
# convex geometry for equalized odds
# ---------------------------------------------------------------------------


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, counterclockwise, no repeated endpoint."""
    pts = np.unique(np.asarray(points, dtype=np.float64), axis=0)
    if pts.shape[0] <= 2:
        return pts
    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= _GEOM_EPS:
            lower.pop()
        lower.append(tuple(p))
    for p in pts[::-1]:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= _GEOM_EPS:
            upper.pop()
        upper.append(tuple(p))
    return np.asarray(lower[:-1] + upper[:-1])


def clip_convex(subject: np.ndarray, clip: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman intersection of two convex CCW polygons."""
    out = [tuple(p) for p in subject]
    n = clip.shape[0]
    for i in range(n):
        if not out:
            break
        a = clip[i]
        b = clip[(i + 1) % n]
        edge = (b[0] - a[0], b[1] - a[1])
        inside = [
            edge[0] * (p[1] - a[1]) - edge[1] * (p[0] - a[0]) >= -_GEOM_EPS
            for p in out
        ]
        nxt = []
        for j, cur in enumerate(out):
            prev = out[j - 1]
            if inside[j]:
                if not inside[j - 1]:
                    nxt.append(_edge_intersect(prev, cur, a, b))
                nxt.append(cur)
            elif inside[j - 1]:
                nxt.append(_edge_intersect(prev, cur, a, b))
        out = nxt
    return np.asarray(_dedupe(out)) if out else np.empty((0, 2))


def _edge_intersect(p, q, a, b):
    d1 = (q[0] - p[0], q[1] - p[1])
    d2 = (b[0] - a[0], b[1] - a[1])
    denom = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(denom) < 1e-30:
        return tuple(q)
    t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / denom
    return (p[0] + t * d1[0], p[1] + t * d1[1])


def _dedupe(points, tol: float = 1e-12):
    out = []
    for p in points:
        if not any(abs(p[0] - r[0]) <= tol and abs(p[1] - r[1]) <= tol for r in out):
            out.append(p)
    return out


def polygon_area(points: np.ndarray) -> float:
    if len(points) < 3:
        return 0.0
    x = np.asarray([p[0] for p in points])
    y = np.asarray([p[1] for p in points])
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def realize_operating_point(roc: RocCurve, point, tol: float = 1e-9) -> GroupRule:
    """Express an achievable (FPR, TPR) point as at most two threshold rules.

    Points on the operating path map to a single (threshold, atom) rule;
    interior points are hit by a chord between a path vertex and a second
    path point, which always exists because the path is connected and the
    point lies in its convex hull.
    """
    P = np.asarray(point, dtype=np.float64)
    verts = roc.points
    thresholds = roc.thresholds

    # on-path check, one segment at a time
    for k in range(verts.shape[0] - 1):
        rule = _on_segment_rule(verts[k], verts[k + 1], thresholds[k], P, tol)
        if rule is not None:
            return rule

    # pick the angular-extreme vertex as the chord anchor
    rel = verts - P
    ang = np.unwrap(np.arctan2(rel[:, 1], rel[:, 0]))
    anchor = int(np.argmin(ang))
    V = verts[anchor]
    direction = P - V
    best = None
    for k in range(verts.shape[0] - 1):
        hit = _ray_segment(V, direction, verts[k], verts[k + 1])
        if hit is None:
            continue
        s, u = hit
        if s >= 1.0 - 1e-9 and (best is None or s > best[0]):
            best = (s, k, u)
    if best is None:
        raise UndefinedRateError(
            f"point ({P[0]:.6f}, {P[1]:.6f}) is not achievable for group {roc.group}")
    s, k, u = best
    lam = min(1.0, 1.0 / s)
    return GroupRule(theta=float(thresholds[anchor]), q=0.0,
                     theta2=float(thresholds[k]), q2=float(min(max(u, 0.0), 1.0)),
                     w=float(lam))


def _on_segment_rule(v0, v1, theta, P, tol):
    d = v1 - v0
    r = P - v0
    seg_len2 = float(d @ d)
    if seg_len2 < 1e-30:
        if abs(r[0]) <= tol and abs(r[1]) <= tol:
            return GroupRule(theta=float(theta), q=0.0)
        return None
    t = float(r @ d) / seg_len2
    if t < -tol or t > 1.0 + tol:
        return None
    gap = r - t * d
    if abs(gap[0]) > tol or abs(gap[1]) > tol:
        return None
    t = min(max(t, 0.0), 1.0)
    return GroupRule(theta=float(theta), q=t)


def _ray_segment(origin, direction, v0, v1):
    """Ray origin + s*direction against segment v0->v1; returns (s, u)."""
    d2 = v1 - v0
    denom = direction[0] * d2[1] - direction[1] * d2[0]
    if abs(denom) < 1e-30:
        return None
    diff = v0 - origin
    s = (diff[0] * d2[1] - diff[1] * d2[0]) / denom
    u = (direction[1] * diff[0] - direction[0] * diff[1]) / denom
    if u < -1e-12 or u > 1.0 + 1e-12:
        return None
    return s, min(max(u, 0.0), 1.0)


def derive_equalized_odds(scores, view: SampleView, loss: LossSpec,
                          weights=None) -> GroupPolicy:
    """Loss-minimizing policy with equal TPR and equal FPR across groups.

    When the intersection of the groups' achievable regions has no area the
    only common points are score-blind coin flips; the returned policy is
    that diagonal mixture with ``degenerate=True``.
    """
    stats = group_stats(view, scores, weights, require_negatives=True)
    rocs = {g: roc_from_cdfs(st.pos_cdf, st.neg_cdf) for g, st in stats.items()}
    hulls = {g: convex_hull(r.points) for g, r in rocs.items()}

    region = None
    for g in sorted(hulls):
        region = hulls[g] if region is None else clip_convex(region, hulls[g])

    c_fn = loss.fn_cost * sum(st.share * st.p1 for st in stats.values())
    c_fp = loss.fp_cost * sum(st.share * (1.0 - st.p1) for st in stats.values())

    def point_loss(p):
        return c_fn * (1.0 - p[1]) + c_fp * p[0]

    prov = {"criterion": "equalized_odds", "event": view.event,
            "weighted": weights is not None,
            "fn_cost": loss.fn_cost, "fp_cost": loss.fp_cost}

    if region is None or len(region) == 0 or polygon_area(region) <= 1e-12:
        # only the diagonal is commonly achievable
        accept_rate = 1.0 if c_fn >= c_fp else 0.0
        rules = {}
        for g, st in stats.items():
            top = float(max(st.pos_cdf.support[-1], st.neg_cdf.support[-1]))
            rules[g] = GroupRule(theta=top, q=0.0, theta2=BELOW_SUPPORT, q2=0.0,
                                 w=accept_rate)
        prov["operating_point"] = [accept_rate, accept_rate]
        prov["expected_loss"] = point_loss((accept_rate, accept_rate))
        return GroupPolicy("equalized_odds", rules, prov, degenerate=True)

    losses = np.array([point_loss(p) for p in region])
    ties = np.flatnonzero(losses <= losses.min() + 0.0)
    # ties: prefer higher TPR, then the realization with less randomization
    order = sorted(ties, key=lambda i: (-region[i][1], region[i][0]))
    candidates = [region[i] for i in order
                  if region[i][1] == region[order[0]][1]]
    best_rules, best_point = None, None
    best_rand = np.inf
    for p in candidates:
        rules = {g: realize_operating_point(rocs[g], p) for g in rocs}
        rand = sum(rule.randomization_mass() for rule in rules.values())
        if rand < best_rand - 1e-15:
            best_rules, best_point, best_rand = rules, p, rand
    prov["operating_point"] = [float(best_point[0]), float(best_point[1])]
    prov["expected_loss"] = float(point_loss(best_point))
    return GroupPolicy("equalized_odds", best_rules, prov)
