"""Censored population samples and conditional views.

A :class:`PopulationSample` holds one row per decision instance: real-valued
covariates, a protected-group code, a binary favorable-outcome label (missing
on censored rows), an inclusion flag ``z`` (the row was screened into the
labeled training data) and a target flag ``t`` (the row belongs to the
population the deployed policy must be fair on).

Convention used across the package: every per-row vector (scores, weights,
base weights) is aligned with the *full* sample; views carry index arrays and
slice those vectors themselves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInputError,
    EmptyViewError,
    ParseError,
    SchemaError,
)

EVENT_TRAIN = "z=1"
EVENT_TARGET = "t=1"
EVENT_ALL = "all"

_EVENTS = {EVENT_TRAIN: ("included", 1), EVENT_TARGET: ("targeted", 1),
           "z=0": ("included", 0), "t=0": ("targeted", 0), EVENT_ALL: (None, None)}

#: Default CSV column roles; covariates default to every ``x_``-prefixed column.
DEFAULT_SCHEMA = {"group": "a", "outcome": "y", "z": "z", "t": "t", "covariates": None}


@dataclass
class PopulationSample:
    """Immutable columnar dataset; build through :meth:`from_arrays` or
    :func:`load_csv`, not the raw constructor."""

    covariates: np.ndarray  # (n, d) float64, finite
    group: np.ndarray       # (n,) int64 codes 1..m
    outcome: np.ndarray     # (n,) float64, NaN marks a censored label
    included: np.ndarray    # (n,) int8
    targeted: np.ndarray    # (n,) int8
    label_map: tuple        # original group labels; code k maps to label_map[k-1]
    feature_names: tuple = ()

    @property
    def n(self) -> int:
        return self.group.shape[0]

    @property
    def n_groups(self) -> int:
        return len(self.label_map)

    @property
    def outcome_observed(self) -> np.ndarray:
        return ~np.isnan(self.outcome)

    def decode_groups(self) -> np.ndarray:
        """Original labels for the encoded group column."""
        labels = np.asarray(self.label_map, dtype=object)
        return labels[self.group - 1]

    @classmethod
    def empty(cls, feature_names=()) -> "PopulationSample":
        """Zero-row sample; only simulators produce these, loaders reject them."""
        d = len(feature_names)
        return cls(np.empty((0, d)), np.empty(0, np.int64), np.empty(0),
                   np.empty(0, np.int8), np.empty(0, np.int8), (), tuple(feature_names))

    @classmethod
    def from_arrays(cls, covariates, group, outcome, included, targeted=None,
                    feature_names=None) -> "PopulationSample":
        covariates = np.asarray(covariates, dtype=np.float64)
        if covariates.ndim == 1:
            covariates = covariates.reshape(-1, 1)
        group_raw = np.asarray(group)
        n = group_raw.shape[0]
        if n == 0:
            raise EmptyInputError("sample has zero rows")
        if covariates.shape[0] != n:
            raise SchemaError(
                f"covariate rows ({covariates.shape[0]}) != group rows ({n})")
        if not np.all(np.isfinite(covariates)):
            raise SchemaError("covariates contain non-finite entries")

        labels, codes = np.unique(group_raw, return_inverse=True)
        if labels.shape[0] < 2:
            raise SchemaError(
                "fewer than 2 distinct groups; fairness between fewer than "
                "2 groups is undefined")
        group_codes = codes.astype(np.int64) + 1

        outcome = np.asarray(outcome, dtype=np.float64).reshape(n)
        observed = ~np.isnan(outcome)
        if not np.all(np.isin(outcome[observed], (0.0, 1.0))):
            raise ParseError("outcome values must be 0, 1, or missing")

        included = _as_binary(included, n, "z")
        if targeted is None:
            targeted = np.ones(n, dtype=np.int8)
        else:
            targeted = _as_binary(targeted, n, "t")

        if np.any((included == 1) & ~observed):
            bad = int(np.flatnonzero((included == 1) & ~observed)[0])
            raise SchemaError(f"row {bad} is included (z=1) but its outcome is missing")

        if feature_names is None:
            feature_names = tuple(f"x{i}" for i in range(covariates.shape[1]))
        sample = cls(covariates.copy(), group_codes, outcome.copy(), included,
                     targeted, tuple(labels.tolist()), tuple(feature_names))
        for arr in (sample.covariates, sample.group, sample.outcome,
                    sample.included, sample.targeted):
            arr.setflags(write=False)
        return sample


def _as_binary(values, n: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64).reshape(n)
    if not np.all(np.isin(arr, (0.0, 1.0))):
        raise ParseError(f"column '{name}' must be binary 0/1")
    return arr.astype(np.int8)


@dataclass
class SampleView:
    """Rows of a sample satisfying one conditioning event."""

    parent: PopulationSample
    event: str
    indices: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.indices.shape[0]

    @property
    def covariates(self) -> np.ndarray:
        return self.parent.covariates[self.indices]

    @property
    def group(self) -> np.ndarray:
        return self.parent.group[self.indices]

    @property
    def outcome(self) -> np.ndarray:
        return self.parent.outcome[self.indices]

    @property
    def outcome_observed(self) -> np.ndarray:
        return ~np.isnan(self.outcome)

    def take(self, per_row: np.ndarray) -> np.ndarray:
        """Slice a full-sample-aligned vector down to this view's rows."""
        per_row = np.asarray(per_row)
        if per_row.shape[0] != self.parent.n:
            raise SchemaError(
                f"per-row vector has {per_row.shape[0]} entries, sample has {self.parent.n}")
        return per_row[self.indices]


def view(sample: PopulationSample, event: str) -> SampleView:
    """Select the rows satisfying ``event`` ("z=1", "t=1", or "all").

    A sample built without a target column has t identically 1, so the
    "t=1" view is the whole sample.
    """
    key = event.lower().replace(" ", "")
    if key not in _EVENTS:
        raise ValueError(f"unknown event {event!r}; expected one of {sorted(_EVENTS)}")
    column, value = _EVENTS[key]
    if column is None:
        idx = np.arange(sample.n)
    else:
        idx = np.flatnonzero(getattr(sample, column) == value)
    if idx.shape[0] == 0:
        raise EmptyViewError(f"event {event!r} selects zero rows")
    return SampleView(sample, key, idx)


# ---------------------------------------------------------------------------
# CSV interchange
# ---------------------------------------------------------------------------


def load_csv(path, schema: dict | None = None) -> PopulationSample:
    """Read a sample from a headered CSV.

    Default columns: any number of ``x_<name>`` covariates, ``a`` group,
    ``y`` outcome (empty string when censored), ``z``, and an optional ``t``.
    ``schema`` may remap roles: keys ``covariates`` (list of column names),
    ``group``, ``outcome``, ``z``, ``t``.
    """
    spec = dict(DEFAULT_SCHEMA)
    if schema:
        spec.update(schema)
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        rows = list(reader)
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")

    col = {name: i for i, name in enumerate(header)}
    cov_names = spec["covariates"]
    if cov_names is None:
        cov_names = [c for c in header if c.startswith("x_")]
    missing = [c for c in (*cov_names, spec["group"], spec["outcome"], spec["z"]) if c not in col]
    if missing:
        raise SchemaError(f"{path}: missing columns {missing}")
    has_t = spec["t"] in col

    n = len(rows)
    cov = np.empty((n, len(cov_names)), dtype=np.float64)
    group = np.empty(n, dtype=object)
    outcome = np.empty(n, dtype=np.float64)
    z = np.empty(n, dtype=np.float64)
    t = np.empty(n, dtype=np.float64)
    for r, row in enumerate(rows):
        try:
            for j, c in enumerate(cov_names):
                cov[r, j] = float(row[col[c]])
            y_raw = row[col[spec["outcome"]]].strip()
            outcome[r] = np.nan if y_raw == "" else float(y_raw)
            z[r] = float(row[col[spec["z"]]])
            t[r] = float(row[col[spec["t"]]]) if has_t else 1.0
        except (ValueError, IndexError) as exc:
            raise ParseError(f"{path}: row {r + 2}: {exc}") from exc
        group[r] = row[col[spec["group"]]]

    names = tuple(c[2:] if c.startswith("x_") else c for c in cov_names)
    return PopulationSample.from_arrays(cov, group, outcome, z,
                                        t if has_t else None, feature_names=names)


def write_csv(sample: PopulationSample, path) -> None:
    """Emit a sample in the :func:`load_csv` format.

    Floats are written with shortest round-trip repr, so a write/load cycle
    reproduces every column bit-exactly.
    """
    header = [f"x_{name}" for name in sample.feature_names] + ["a", "y", "z", "t"]
    groups = sample.decode_groups()
    observed = sample.outcome_observed
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(sample.n):
            row = [repr(float(v)) for v in sample.covariates[i]]
            row.append(str(groups[i]))
            row.append(str(int(sample.outcome[i])) if observed[i] else "")
            row.append(str(int(sample.included[i])))
            row.append(str(int(sample.targeted[i])))
            writer.writerow(row)


def write_empty_csv(path, feature_names=()) -> None:
    """Header-only CSV for zero-row simulation requests."""
    header = [f"x_{name}" for name in feature_names] + ["a", "y", "z", "t"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerow(header)
