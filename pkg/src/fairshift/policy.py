"""Randomized group-threshold decision policies.

A rule for one group is a threshold plus an acceptance probability for
scores landing exactly on it; an optional second (threshold, atom) pair with
a mixing weight covers the two-point mixtures needed to realize arbitrary
points of the achievable (FPR, TPR) region.  Decisions depend only on the
score, the group, and randomness that is independent of everything else.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .dataset import SampleView
from .errors import MissingPolicyError, UndefinedRateError
from .rates import BELOW_SUPPORT

_MIX_STREAM = 0
_ATOM_STREAM = 1


@dataclass(frozen=True)
class GroupRule:
    """Operating rule for one group.

    With probability ``1 - w`` act at (theta, q): predict 1 above theta,
    predict 1 with probability q exactly at theta.  With probability ``w``
    act at (theta2, q2).  ``w`` defaults to 0 (single operating point).
    """

    theta: float
    q: float = 0.0
    theta2: float | None = None
    q2: float = 0.0
    w: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise ValueError(f"atom probability q={self.q} outside [0, 1]")
        if not 0.0 <= self.q2 <= 1.0:
            raise ValueError(f"atom probability q2={self.q2} outside [0, 1]")
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"mixing weight w={self.w} outside [0, 1]")
        if self.w > 0.0 and self.theta2 is None:
            raise ValueError("mixing weight set but no second operating point")

    def expected_decision(self, scores: np.ndarray) -> np.ndarray:
        """P(decide 1 | score), the analytic average over the randomness."""
        d = _point_decision(scores, self.theta, self.q)
        if self.w > 0.0:
            d2 = _point_decision(scores, self.theta2, self.q2)
            d = (1.0 - self.w) * d + self.w * d2
        return d

    def randomization_mass(self) -> float:
        """Crude total randomness: used only to break exact ties."""
        r = min(self.w, 1.0 - self.w)
        for q in (self.q, self.q2):
            r += min(q, 1.0 - q)
        return r


def _point_decision(scores: np.ndarray, theta: float, q: float) -> np.ndarray:
    d = (scores > theta).astype(np.float64)
    if q > 0.0:
        d = d + q * (scores == theta)
    return d


@dataclass
class GroupPolicy:
    """Per-group rules plus provenance describing how they were derived."""

    criterion: str
    rules: dict[int, GroupRule]
    provenance: dict = field(default_factory=dict)
    degenerate: bool = False

    def groups(self):
        return sorted(self.rules)

    def rule_for(self, group: int) -> GroupRule:
        try:
            return self.rules[group]
        except KeyError:
            raise MissingPolicyError(f"no rule for group {group}") from None

    def expected_decision(self, scores: np.ndarray, groups: np.ndarray) -> np.ndarray:
        scores = np.asarray(scores, dtype=np.float64)
        out = np.empty(scores.shape[0])
        for g in np.unique(groups):
            sel = groups == g
            out[sel] = self.rule_for(int(g)).expected_decision(scores[sel])
        return out


def apply_policy(policy: GroupPolicy, scores, groups, seed: int) -> np.ndarray:
    """Draw binary decisions; deterministic given (inputs, seed).

    Row randomness is keyed on (seed, absolute row index), so results do not
    depend on evaluation order or on splitting rows across workers.
    """
    scores = np.asarray(scores, dtype=np.float64)
    groups = np.asarray(groups)
    idx = np.arange(scores.shape[0], dtype=np.uint64)
    u_mix = _kernels.counter_uniforms(seed, idx, _MIX_STREAM)
    u_atom = _kernels.counter_uniforms(seed, idx, _ATOM_STREAM)
    out = np.zeros(scores.shape[0], dtype=np.int8)
    for g in np.unique(groups):
        rule = policy.rule_for(int(g))
        sel = groups == g
        s = scores[sel]
        use_second = u_mix[sel] < rule.w
        theta = np.where(use_second, rule.theta2 if rule.theta2 is not None else rule.theta,
                         rule.theta)
        q = np.where(use_second, rule.q2, rule.q)
        decide = (s > theta) | ((s == theta) & (u_atom[sel] < q))
        out[sel] = decide.astype(np.int8)
    return out


@dataclass
class RatesTable:
    """Exact expected TPR/FPR (and complements) per group under one event."""

    event: str
    rates: dict[int, dict[str, float]]

    def tpr(self, group: int) -> float:
        return self.rates[group]["tpr"]

    def fpr(self, group: int) -> float:
        return self.rates[group]["fpr"]

    def as_rows(self):
        for g in sorted(self.rates):
            r = self.rates[g]
            yield (g, r["tpr"], r["fpr"], r["fnr"], r["tnr"])


def _cell_rate(rule: GroupRule, view: SampleView, scores, w_all, group, label):
    sel = (view.group == group) & view.outcome_observed & (view.outcome == label)
    if not np.any(sel):
        raise UndefinedRateError(
            f"no rows with label {label} in group {group} under event '{view.event}'")
    w = w_all[sel]
    w = w / np.max(w)
    d = rule.expected_decision(scores[sel])
    return float(np.sum(w * d) / np.sum(w))


def _view_weights(view: SampleView, weights):
    if weights is None:
        return np.ones(view.n)
    return view.take(np.asarray(weights, dtype=np.float64))


def expected_rates(policy: GroupPolicy, view: SampleView, scores,
                   weights=None) -> RatesTable:
    """Analytic per-group rates of the policy on the view; no sampling.

    Only rows with an observed outcome enter the conditioning cells.  Raises
    when any (group, label) cell of the policy's groups is empty.
    """
    scores = view.take(np.asarray(scores, dtype=np.float64))
    w_all = _view_weights(view, weights)
    table = {}
    for g in policy.groups():
        rule = policy.rule_for(g)
        tpr = _cell_rate(rule, view, scores, w_all, g, 1)
        fpr = _cell_rate(rule, view, scores, w_all, g, 0)
        table[g] = {"tpr": tpr, "fnr": 1.0 - tpr, "fpr": fpr, "tnr": 1.0 - fpr}
    return RatesTable(view.event, table)


def expected_tprs(policy: GroupPolicy, view: SampleView, scores,
                  weights=None) -> dict[int, float]:
    """Per-group expected TPRs only; groups need no negative-label rows."""
    scores = view.take(np.asarray(scores, dtype=np.float64))
    w_all = _view_weights(view, weights)
    return {g: _cell_rate(policy.rule_for(g), view, scores, w_all, g, 1)
            for g in policy.groups()}


# ---------------------------------------------------------------------------
# JSON interchange
# ---------------------------------------------------------------------------


def _theta_json(theta):
    if theta is None:
        return None
    if math.isinf(theta):  # sentinels, kept JSON-clean
        return "-inf" if theta < 0 else "+inf"
    return float(theta)


def _theta_from_json(value):
    if value is None:
        return None
    if value == "-inf":
        return BELOW_SUPPORT
    if value == "+inf":
        return math.inf
    return float(value)


def policy_to_dict(policy: GroupPolicy) -> dict:
    return {
        "criterion": policy.criterion,
        "per_group": [
            {
                "group": g,
                "theta": _theta_json(policy.rules[g].theta),
                "q": policy.rules[g].q,
                "theta2": _theta_json(policy.rules[g].theta2),
                "q2": policy.rules[g].q2,
                "w": policy.rules[g].w,
            }
            for g in policy.groups()
        ],
        "provenance": dict(policy.provenance, degenerate=policy.degenerate),
    }


def policy_to_json(policy: GroupPolicy) -> str:
    return json.dumps(policy_to_dict(policy), indent=2, sort_keys=True)


def policy_from_dict(doc: dict) -> GroupPolicy:
    rules = {}
    for entry in doc["per_group"]:
        theta = _theta_from_json(entry["theta"])
        rules[int(entry["group"])] = GroupRule(
            theta=BELOW_SUPPORT if theta is None else theta,
            q=float(entry.get("q") or 0.0),
            theta2=_theta_from_json(entry.get("theta2")),
            q2=float(entry.get("q2") or 0.0),
            w=float(entry.get("w") or 0.0),
        )
    prov = dict(doc.get("provenance", {}))
    degenerate = bool(prov.pop("degenerate", False))
    return GroupPolicy(doc["criterion"], rules, prov, degenerate)


def policy_from_json(text: str) -> GroupPolicy:
    return policy_from_dict(json.loads(text))
