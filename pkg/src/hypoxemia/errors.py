"""Exception hierarchy shared across the package.

Exit-code mapping used by the CLI: schema/config problems exit 2, partial
row-level failures exit 3, numerical/training failures exit 4.
"""


class HypoxemiaError(Exception):
    """Base class for all package errors."""


class InvalidInputError(HypoxemiaError):
    """A value violates a documented precondition (range, finiteness, ...)."""


class MissingInputError(InvalidInputError):
    """A required value is absent (e.g. an unimputed vital)."""


class UnsupportedPopulationError(InvalidInputError):
    """Population with no scoring table (pediatric COPD)."""


class SchemaError(InvalidInputError):
    """Input file or config does not match the documented schema."""


class ConfigError(SchemaError):
    """Run configuration is malformed or contains unknown keys."""


class InsufficientDataError(HypoxemiaError):
    """Not enough rows/points to perform the operation."""


class UnimputableColumnError(HypoxemiaError):
    """Column has no observed values to impute from."""


class DegenerateClassError(HypoxemiaError):
    """A required class is absent from the labels."""


class TrainingError(HypoxemiaError):
    """Model training cannot proceed (empty data, single class, non-finite)."""


class WrongObjectiveError(TrainingError):
    """Operation requires a model trained with a different objective."""


class UndefinedMetricError(HypoxemiaError):
    """Metric has no defined value for the given inputs (reported absent)."""


class NumericalError(HypoxemiaError):
    """A numerical stage failed to converge or produced invalid values."""
