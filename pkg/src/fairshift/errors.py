"""Semantic exception hierarchy shared by every module.

Three families map onto CLI exit codes: configuration problems (2), data
problems (3), and degenerate-statistics problems (4).
"""


class FairshiftError(Exception):
    """Base class for all library errors."""


class ConfigError(FairshiftError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class DataError(FairshiftError):
    """Malformed or unusable input data (CLI exit code 3)."""


class SchemaError(DataError):
    """Input violates the declared column schema or a sample invariant."""


class ParseError(DataError):
    """A field could not be parsed into its declared type."""


class EmptyInputError(DataError):
    """A dataset with zero rows was supplied."""


class EmptyViewError(DataError):
    """A conditioning event selects zero rows."""


class ShapeError(DataError, ValueError):
    """Array dimensions do not match the model or each other."""


class MissingPolicyError(DataError):
    """A group label has no entry in the decision policy."""


class ConditioningError(DataError, ValueError):
    """Two conditional objects do not condition on the same (group, label)."""


class StatisticsError(FairshiftError):
    """Degenerate statistics: a requested estimand is undefined (exit code 4)."""


class UndefinedRateError(StatisticsError):
    """A rate is requested for an empty (group, label) cell."""


class DegenerateFitError(StatisticsError):
    """Model fitting is impossible (e.g. single-class outcomes)."""


class NotEqualOpportunityError(StatisticsError):
    """A policy required to equalize training TPRs does not."""


class EndowmentError(StatisticsError):
    """The score-endowment dominance precondition does not hold."""


class QuantileUndefinedError(StatisticsError):
    """A quantile threshold is undefined (constant feature)."""
