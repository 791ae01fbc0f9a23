import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import fairshift as fs
from fairshift.errors import ConditioningError, UndefinedRateError
from fairshift.rates import (
    BELOW_SUPPORT,
    conditional_cdf,
    delta_curve,
    inverse_cdf,
    merged_grid_with_midpoints,
    pointwise_geq,
    roc_curve,
)


def tiny_sample(scores, labels, groups=None):
    """Sample with all rows included; returns (sample, view, full scores)."""
    n = len(scores)
    groups = groups if groups is not None else [0] * (n - 1) + [1]
    sample = fs.PopulationSample.from_arrays(
        np.zeros((n, 1)), np.array(groups), np.array(labels, dtype=float),
        np.ones(n))
    return sample, fs.view(sample, "z=1"), np.asarray(scores, dtype=float)


class TestConditionalCdf:
    def test_uniform_weights(self):
        _, v, s = tiny_sample([0.2, 0.8, 0.5], [1, 1, 0], [0, 0, 1])
        cdf = conditional_cdf(v, s, 1, 1)
        assert cdf.evaluate(0.2) == 0.5
        assert cdf.evaluate(0.5) == 0.5
        assert cdf.evaluate(0.8) == 1.0

    def test_weighted_counts(self):
        _, v, s = tiny_sample([0.2, 0.8, 0.5], [1, 1, 0], [0, 0, 1])
        cdf = conditional_cdf(v, s, 1, 1, weights=np.array([3.0, 1.0, 1.0]))
        assert cdf.evaluate(0.2) == 0.75

    def test_empty_cell_errors(self):
        _, v, s = tiny_sample([0.2, 0.8], [1, 1], [0, 1])
        with pytest.raises(UndefinedRateError):
            conditional_cdf(v, s, 1, 0)

    def test_counting_oracle_on_loan_slice(self, loan_views):
        sample, oracle, train, _ = loan_views
        cdf = conditional_cdf(train, oracle.score_blind, 1, 1)
        s = train.take(oracle.score_blind)
        sel = (train.group == 1) & (train.outcome == 1)
        grid = np.linspace(0.05, 0.95, 20)
        direct = [(s[sel] <= t).mean() for t in grid]
        np.testing.assert_allclose(cdf.evaluate(grid), direct, atol=1e-12)

    def test_constant_weights_match_unweighted_bitwise(self):
        _, v, s = tiny_sample([0.2, 0.8, 0.5, 0.3], [1, 1, 0, 1], [0, 0, 1, 0])
        base = conditional_cdf(v, s, 1, 1)
        for c in (0.1, 1.0, 7.0):
            w = conditional_cdf(v, s, 1, 1, weights=np.full(4, c))
            assert np.array_equal(w.mass, base.mass)
            assert np.array_equal(w.cumulative, base.cumulative)


class TestInverse:
    def cdf(self):
        _, v, s = tiny_sample([0.2, 0.8, 0.8, 0.2, 0.9],
                              [1, 1, 1, 1, 0], [0, 0, 0, 0, 1])
        return conditional_cdf(v, s, 1, 1)

    def test_atoms(self):
        cdf = self.cdf()
        assert inverse_cdf(cdf, 0.5) == 0.2
        assert inverse_cdf(cdf, 0.6) == 0.8
        assert inverse_cdf(cdf, 1.0) == 0.8

    def test_zero_returns_sentinel(self):
        cdf = self.cdf()
        theta = inverse_cdf(cdf, 0.0)
        assert theta == BELOW_SUPPORT
        # every score is strictly above the sentinel: acceptance is total
        assert np.all(np.array([0.2, 0.8]) > theta)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            inverse_cdf(self.cdf(), 1.5)


@settings(max_examples=80, deadline=None)
@given(st.lists(st.sampled_from([0.1, 0.2, 0.4, 0.5, 0.7, 0.9]),
                min_size=1, max_size=12),
       st.floats(min_value=1e-9, max_value=1.0))
def test_generalized_inverse_property(scores, q):
    labels = [1] * len(scores) + [0]
    _, v, s = tiny_sample(scores + [0.5], labels,
                          [0] * len(scores) + [1])
    cdf = conditional_cdf(v, s, 1, 1)
    theta = cdf.inverse(q)
    assert cdf.evaluate(theta) >= q
    below = cdf.support[cdf.support < theta]
    if below.size:
        assert np.all(cdf.evaluate(below) < q)


class TestDeltaCurve:
    def build(self, train_scores, target_scores):
        labels_tr = [1] * len(train_scores)
        labels_tg = [1] * len(target_scores)
        scores = train_scores + target_scores + [0.5, 0.5]
        z = [1] * len(train_scores) + [0] * len(target_scores) + [1, 0]
        y = labels_tr + labels_tg + [1, 1]
        groups = [0] * (len(scores) - 2) + [1, 1]
        sample = fs.PopulationSample.from_arrays(
            np.zeros((len(scores), 1)), np.array(groups),
            np.array(y, dtype=float), np.array(z))
        train = fs.view(sample, "z=1")
        target = fs.view(sample, "t=1")
        s = np.asarray(scores)
        return (conditional_cdf(train, s, 1, 1), conditional_cdf(target, s, 1, 1))

    def test_identical_cdfs_zero(self):
        f, g = self.build([0.2, 0.6], [0.2, 0.6])
        curve = delta_curve(f, g)
        grid = np.linspace(0, 1, 21)
        assert np.allclose(curve.evaluate(grid), 0.0)

    def test_point_masses(self):
        # training positive at 0.6, target adds one at 0.3
        f, g = self.build([0.6], [0.3])
        curve = delta_curve(f, g)
        # target view sees both rows: F_target(0.4) = 0.5, train 0
        assert curve.evaluate(0.4) == 0.0 - 0.5
        assert curve.evaluate(0.7) == 0.0

    def test_conditioning_mismatch(self, loan_views):
        _, oracle, train, _ = loan_views
        f1 = conditional_cdf(train, oracle.score_blind, 1, 1)
        f2 = conditional_cdf(train, oracle.score_blind, 2, 1)
        with pytest.raises(ConditioningError):
            delta_curve(f1, f2)

    def test_loan_deltas_match_counting(self, loan_views):
        sample, oracle, train, target = loan_views
        s_full = oracle.score_blind
        for g in (1, 2):
            curve = delta_curve(conditional_cdf(train, s_full, g, 1),
                                conditional_cdf(target, s_full, g, 1))
            grid = np.linspace(0.01, 0.99, 200)
            s_tr = train.take(s_full)[(train.group == g) & (train.outcome == 1)]
            s_tg = target.take(s_full)[(target.group == g) & (target.outcome == 1)]
            direct = np.array([(s_tr <= t).mean() - (s_tg <= t).mean()
                               for t in grid])
            np.testing.assert_allclose(curve.evaluate(grid), direct, atol=1e-12)

    def test_vanishes_outside_support_union(self):
        f, g = self.build([0.4, 0.6], [0.3, 0.7])
        curve = delta_curve(f, g)
        assert curve.evaluate(0.05) == 0.0
        assert curve.evaluate(0.95) == 0.0


class TestRoc:
    def test_perfect_separation_passes_through_corner(self):
        _, v, s = tiny_sample([0.9, 0.8, 0.1, 0.2], [1, 1, 0, 0],
                              [0, 0, 0, 1])
        with pytest.raises(UndefinedRateError):
            roc_curve(v, s, 2)  # single-label group
        roc = roc_curve(v, s, 1)
        assert any(np.allclose(p, (0.0, 1.0)) for p in roc.points)
        assert np.allclose(roc.points[0], (0, 0))
        assert np.allclose(roc.points[-1], (1, 1))

    def test_label_free_score_hugs_diagonal(self):
        rng = np.random.default_rng(0)
        n = 4000
        scores = np.tile(rng.uniform(0, 1, n // 2), 2)
        labels = np.r_[np.ones(n // 2), np.zeros(n // 2)]
        _, v, s = tiny_sample(list(scores) + [0.5], list(labels) + [1],
                              [0] * n + [1])
        roc = roc_curve(v, s, 1)
        # identical score multisets per label: the curve is the diagonal
        assert np.max(np.abs(roc.points[:, 0] - roc.points[:, 1])) < 1e-12

    def test_auc_matches_pairwise_oracle(self, loan100k):
        sample, oracle = loan100k
        train = fs.view(sample, "z=1")
        s = train.take(oracle.score_blind)
        keep = train.group == 1
        s_g = s[keep][:2000]
        y_g = train.outcome[keep][:2000]
        sub = fs.PopulationSample.from_arrays(
            np.zeros((len(s_g) + 1, 1)),
            np.r_[np.zeros(len(s_g), dtype=int), 1],
            np.r_[y_g, 1.0], np.ones(len(s_g) + 1))
        v = fs.view(sub, "z=1")
        roc = roc_curve(v, np.r_[s_g, 0.5], 1)
        pos = s_g[y_g == 1]
        neg = s_g[y_g == 0]
        gt = (pos[:, None] > neg[None, :]).mean()
        tie = (pos[:, None] == neg[None, :]).mean()
        assert abs(roc.auc() - (gt + 0.5 * tie)) < 1e-9

    def test_rates_nonincreasing_in_threshold(self, loan_views):
        _, oracle, train, _ = loan_views
        roc = roc_curve(train, oracle.score_blind, 2)
        assert np.all(np.diff(roc.points[:, 0]) >= 0)
        assert np.all(np.diff(roc.points[:, 1]) >= 0)
        assert np.all(np.diff(roc.thresholds) < 0)


def test_dominance_on_merged_support():
    _, v, s = tiny_sample([0.2, 0.6, 0.3, 0.7], [1, 1, 1, 1], [0, 0, 1, 1])
    lo = conditional_cdf(v, s, 1, 1)   # atoms at 0.2, 0.6
    hi = conditional_cdf(v, s, 2, 1)   # atoms at 0.3, 0.7
    assert pointwise_geq(lo, hi)       # lo's population is smaller
    assert not pointwise_geq(hi, lo)
    # eps slack absorbs the violation
    assert pointwise_geq(hi, lo, eps=1.0)


def test_merged_grid_contains_midpoints():
    _, v, s = tiny_sample([0.2, 0.6, 0.4, 0.5], [1, 1, 1, 1], [0, 0, 1, 1])
    f = conditional_cdf(v, s, 1, 1)
    g = conditional_cdf(v, s, 2, 1)
    grid = merged_grid_with_midpoints(f, g)
    expected = [0.2, 0.3, 0.4, 0.45, 0.5, 0.55, 0.6]
    np.testing.assert_allclose(grid, expected, atol=1e-12)
