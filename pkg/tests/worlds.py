"""Exactly enumerated discrete populations for oracle tests.

A world is a finite list of (covariate, group) cells with cell probability,
conditional outcome/inclusion/targeting probabilities, and a deterministic
score.  It expands into a PopulationSample holding one row per realized
(cell, y, z, t) combination, with the exact joint probability as the row's
base weight, so every population quantity is a small exact sum.

All stock worlds use dyadic probabilities (and power-of-two propensity
ratios) so that products and sums stay exact in float64 and zero population
gaps come out as exactly 0.0.
"""

from dataclasses import dataclass, field

import numpy as np

from fairshift.dataset import PopulationSample


@dataclass(frozen=True)
class Cell:
    x: tuple
    a: int
    p_cell: float
    p_y: float
    p_z: float
    p_t: float = 1.0
    score: float | None = None


@dataclass
class EnumeratedWorld:
    sample: PopulationSample
    base_weights: np.ndarray
    scores: np.ndarray
    ratio: np.ndarray            # true propensity ratio P(t|cell)/P(z|cell)
    rows: list = field(repr=False, default_factory=list)

    def group_code(self, label: int) -> int:
        return self.sample.label_map.index(label) + 1


def build_world(cells: list[Cell]) -> EnumeratedWorld:
    total = sum(c.p_cell for c in cells)
    assert abs(total - 1.0) < 1e-12, f"cell probabilities sum to {total}"
    rows = []
    for c in cells:
        score = c.p_y if c.score is None else c.score
        for y in (0, 1):
            p_y = c.p_y if y == 1 else 1.0 - c.p_y
            if p_y == 0.0:
                continue
            for z in (0, 1):
                p_z = c.p_z if z == 1 else 1.0 - c.p_z
                if p_z == 0.0:
                    continue
                for t in (0, 1):
                    p_t = c.p_t if t == 1 else 1.0 - c.p_t
                    if p_t == 0.0:
                        continue
                    mass = c.p_cell * p_y * p_z * p_t
                    rows.append((c.x, c.a, y, z, t, mass, score, c.p_t / c.p_z))
    x = np.array([r[0] for r in rows], dtype=np.float64)
    sample = PopulationSample.from_arrays(
        x,
        np.array([r[1] for r in rows]),
        np.array([float(r[2]) for r in rows]),
        np.array([r[3] for r in rows], dtype=np.int8),
        np.array([r[4] for r in rows], dtype=np.int8),
    )
    return EnumeratedWorld(
        sample=sample,
        base_weights=np.array([r[5] for r in rows]),
        scores=np.array([r[6] for r in rows]),
        ratio=np.array([r[7] for r in rows]),
        rows=rows,
    )


def direct_rate(world: EnumeratedWorld, decision_fn, group_code: int, label: int,
                event: str) -> float:
    """Population P(decide=1 | Y=label, A=group, event) by direct summation.

    ``decision_fn(scores) -> expected decisions``; selection and summation
    run on the raw row arrays, independently of the library's views."""
    s = world.sample
    if event == "t=1":
        keep = s.targeted == 1
    elif event == "z=1":
        keep = s.included == 1
    else:
        keep = np.ones(s.n, dtype=bool)
    sel = keep & (s.group == group_code) & (s.outcome == label)
    m = world.base_weights[sel]
    d = decision_fn(world.scores[sel])
    return float(np.sum(m * d) / np.sum(m))


def sample_world(world: EnumeratedWorld, n: int, seed: int) -> PopulationSample:
    """n iid draws from the world's joint distribution (for bootstrap tests)."""
    rng = np.random.default_rng(seed)
    idx = rng.choice(len(world.base_weights),
                     p=world.base_weights / world.base_weights.sum(), size=n)
    s = world.sample
    return PopulationSample.from_arrays(
        s.covariates[idx], np.asarray(s.decode_groups())[idx], s.outcome[idx],
        s.included[idx], s.targeted[idx])


# ---------------------------------------------------------------------------
# stock worlds
# ---------------------------------------------------------------------------


def ratio_sign_world(direction: int) -> EnumeratedWorld:
    """One group (plus a bystander), two score cells at 0.25 and 0.75.

    direction +1: the high-score cell is censored harder (its propensity
    ratio is larger), so the target TPR exceeds the training TPR at a 0.5
    threshold; -1 mirrors it; 0 uses a covariate-free inclusion rule.
    Propensity ratios are powers of two, so expected zero differences are
    exactly zero in float64.
    """
    if direction > 0:
        pz_low, pz_high = 0.5, 0.125
    elif direction < 0:
        pz_low, pz_high = 0.125, 0.5
    else:
        pz_low = pz_high = 0.25
    cells = [
        Cell(x=(0.0,), a=0, p_cell=0.25, p_y=0.5, p_z=pz_low, score=0.25),
        Cell(x=(1.0,), a=0, p_cell=0.25, p_y=0.5, p_z=pz_high, score=0.75),
        # bystander group so the sample is well-formed (2+ groups)
        Cell(x=(2.0,), a=1, p_cell=0.25, p_y=0.5, p_z=0.25, score=0.25),
        Cell(x=(3.0,), a=1, p_cell=0.25, p_y=0.5, p_z=0.25, score=0.75),
    ]
    return build_world(cells)


def rich_two_group_world() -> EnumeratedWorld:
    """Two groups, four score cells each, dyadic everywhere; censoring
    bites group 1's high scores and group 0's low scores differently."""
    cells = [
        Cell(x=(0.0,), a=0, p_cell=0.125, p_y=0.25, p_z=0.5, score=0.125),
        Cell(x=(1.0,), a=0, p_cell=0.125, p_y=0.5, p_z=0.25, score=0.375),
        Cell(x=(2.0,), a=0, p_cell=0.125, p_y=0.5, p_z=0.5, score=0.625),
        Cell(x=(3.0,), a=0, p_cell=0.125, p_y=0.75, p_z=0.125, score=0.875),
        Cell(x=(4.0,), a=1, p_cell=0.125, p_y=0.25, p_z=0.125, score=0.125),
        Cell(x=(5.0,), a=1, p_cell=0.125, p_y=0.5, p_z=0.5, score=0.375),
        Cell(x=(6.0,), a=1, p_cell=0.125, p_y=0.5, p_z=0.125, score=0.625),
        Cell(x=(7.0,), a=1, p_cell=0.125, p_y=0.75, p_z=0.25, score=0.875),
    ]
    return build_world(cells)


def atom_views(train_atoms: dict, target_atoms: dict):
    """Sample whose per-group positive-score CDFs have the given atoms.

    ``{group_label: [(score, multiplicity), ...]}`` for each population;
    training rows get z=1/t=0, target rows z=0/t=1, so the two conditional
    CDFs are exactly the specified (normalized) atom masses.  Returns
    (sample, train_view, target_view, scores).
    """
    import fairshift as fs

    xs, groups, zs, ts, scores = [], [], [], [], []
    for atoms, z in ((train_atoms, 1), (target_atoms, 0)):
        for label, spec in atoms.items():
            for score, mult in spec:
                for _ in range(mult):
                    xs.append(float(len(xs)))
                    groups.append(label)
                    zs.append(z)
                    ts.append(1 - z)
                    scores.append(score)
    n = len(xs)
    sample = PopulationSample.from_arrays(
        np.array(xs).reshape(-1, 1), np.array(groups), np.ones(n),
        np.array(zs, dtype=np.int8), np.array(ts, dtype=np.int8))
    return (sample, fs.view(sample, "z=1"), fs.view(sample, "t=1"),
            np.array(scores))


def strong_dbd_views():
    """Group a identical between populations; group b's screened-in
    positives sit at 0.6 while its target positives sit at 0.3."""
    train = {0: [(0.5, 2)], 1: [(0.6, 2)]}
    target = {0: [(0.5, 2)], 1: [(0.3, 2)]}
    return atom_views(train, target)


def strong_sweep_views():
    """Strong certificate with enough atoms for nontrivial breakpoints:
    group a's screened-in positives sit lower than its target positives,
    group b's the other way around."""
    train = {0: [(0.3, 2), (0.7, 2)], 1: [(0.4, 1), (0.8, 3)]}
    target = {0: [(0.3, 1), (0.7, 3)], 1: [(0.4, 2), (0.8, 2)]}
    return atom_views(train, target)


def strong_strict_dbd_views():
    """Both gaps nonzero throughout (0, 1): atoms at the endpoints with
    masses shifted in opposite directions between populations."""
    train = {0: [(0.0, 2), (1.0, 2)], 1: [(0.0, 1), (1.0, 3)]}
    target = {0: [(0.0, 1), (1.0, 3)], 1: [(0.0, 2), (1.0, 2)]}
    return atom_views(train, target)


def weak_strict_dbd_views():
    """Same-signed gaps with group a's uniformly above group b's on
    (0.1, 0.9): the strict interval certificate applies."""
    supports = (0.1, 0.3, 0.5, 0.7, 0.9)
    train = {
        0: [(s, m) for s, m in zip(supports, (2, 2, 4, 4, 4))],   # cum /16: 2,4,8,12,16
        1: [(s, m) for s, m in zip(supports, (2, 4, 4, 4, 2))],   # cum /16: 2,6,10,14,16
    }
    target = {
        0: [(s, m) for s, m in zip(supports, (3, 2, 4, 4, 3))],   # gap -1/16 flat
        1: [(s, m) for s, m in zip(supports, (6, 4, 4, 2, 0)) if m],  # gap -1/4,-1/4,-1/4,-1/8
    }
    return atom_views(train, target)


def weak_endowed_dbd_views():
    """Ordered-pair certificate: group a's gap exceeds group b's at equal or
    higher thresholds, but not across descending pairs, so the plain strict
    interval is narrow while the endowed one spans (0.1, 0.9).  Group a's
    screened-in positives score-dominate group b's."""
    supports = (0.1, 0.3, 0.5, 0.7, 0.9)
    train = {
        0: [(s, m) for s, m in zip(supports, (2, 2, 4, 4, 4))],    # cum/16: 2,4,8,12,16
        1: [(s, m) for s, m in zip(supports, (5, 3, 2, 4, 2))],    # cum/16: 5,8,10,14,16
    }
    target = {
        # gaps for a: -1/4, -3/16, -1/8, -1/16, 0
        0: [(s, m) for s, m in zip(supports, (6, 1, 3, 3, 3))],    # cum/16: 6,7,10,13,16
        # gaps for b: -5/16, -5/16, -5/16, -1/8, 0
        1: [(s, m) for s, m in zip(supports, (10, 3, 2, 1, 0)) if m],
    }
    return atom_views(train, target)


def group_only_censoring_world() -> EnumeratedWorld:
    """Inclusion probability depends on the group alone (1/2 vs 1/4);
    covariates shift scores within groups but not inclusion."""
    cells = [
        Cell(x=(0.0,), a=0, p_cell=0.25, p_y=0.25, p_z=0.5, score=0.25),
        Cell(x=(1.0,), a=0, p_cell=0.25, p_y=0.75, p_z=0.5, score=0.75),
        Cell(x=(2.0,), a=1, p_cell=0.25, p_y=0.5, p_z=0.25, score=0.25),
        Cell(x=(3.0,), a=1, p_cell=0.25, p_y=0.5, p_z=0.25, score=0.75),
    ]
    return build_world(cells)


def power_of_two_world() -> EnumeratedWorld:
    """Every screened-in row weight and every propensity ratio is a power of
    two, so multiplying the weights by any positive constant is exact in
    float64 and the normalized computations cannot move by even an ulp."""
    cells = [
        Cell(x=(0.0,), a=0, p_cell=0.125, p_y=0.5, p_z=0.5, score=0.125),
        Cell(x=(1.0,), a=0, p_cell=0.0625, p_y=0.5, p_z=0.25, score=0.375),
        Cell(x=(2.0,), a=0, p_cell=0.0625, p_y=0.5, p_z=0.5, score=0.625),
        Cell(x=(3.0,), a=0, p_cell=0.25, p_y=0.5, p_z=0.125, score=0.875),
        Cell(x=(4.0,), a=1, p_cell=0.25, p_y=0.5, p_z=0.25, score=0.125),
        Cell(x=(5.0,), a=1, p_cell=0.0625, p_y=0.5, p_z=0.5, score=0.375),
        Cell(x=(6.0,), a=1, p_cell=0.0625, p_y=0.5, p_z=0.125, score=0.625),
        Cell(x=(7.0,), a=1, p_cell=0.125, p_y=0.5, p_z=0.5, score=0.875),
    ]
    return build_world(cells)
