"""
Errors Module
Error types shared across the pipeline; data errors derive from NegativeSpaceError (exit status 1)
"""


class NegativeSpaceError(Exception):
    """Base class for data errors raised by negative-space."""

    pass


# Ingestion


class HeaderMismatch(NegativeSpaceError):
    """CSV header does not match the schema names."""

    pass


class MissingValue(NegativeSpaceError):
    """A cell is empty; the row is rejected."""

    def __init__(self, row: int, feature: str):
        self.row = row
        self.feature = feature
        super().__init__(f"Missing value in row {row}, column '{feature}'")


class TypeMismatch(NegativeSpaceError):
    """A cell does not conform to its column kind."""

    pass


class UnknownLevel(NegativeSpaceError):
    """An ordered-categorical label is not in the declared level list."""

    pass


class SingleValuedFeature(NegativeSpaceError):
    """A feature has fewer than two distinct observed values."""

    pass


# Geometry


class EmptySubset(NegativeSpaceError):
    """A subset payload has zero size."""

    pass


class EpsilonOutOfRange(NegativeSpaceError):
    """The length adjustment constant is outside (0, 1)."""

    pass


class GapNotBoundary(NegativeSpaceError):
    """A gap piece does not touch the boundary of its subset."""

    pass


class GapNotContained(NegativeSpaceError):
    """A gap is not a proper part of its subset."""

    pass


# Density proxies


class ZeroRange(NegativeSpaceError):
    """A numeric feature has zero range in a Gower computation."""

    pass


class MTooLarge(NegativeSpaceError):
    """Neighbour rank m is outside 1 <= m < n."""

    pass


class SubsampleTooSmall(NegativeSpaceError):
    """Isolation-forest subsample is outside 2 <= subsample <= n."""

    pass


# Partitioning


class TooFewRows(NegativeSpaceError):
    """Dataset is smaller than two minimum leaves."""

    pass


class NotCategorical(NegativeSpaceError):
    """Conditioning feature is not categorical with two or more levels."""

    pass


# Metrics / rendering / files


class NegativeInput(NegativeSpaceError):
    """Chi-squared tail requested for x < 0 or df < 1."""

    pass


class NonRenderableFeature(NegativeSpaceError):
    """A nominal feature was chosen as a plot axis."""

    pass


class ModelDataMismatch(NegativeSpaceError):
    """Dataset columns do not match the features of a partition model."""

    pass


class PartitionFormatError(NegativeSpaceError):
    """A partition file cannot be parsed or has an unsupported version."""

    pass


class SchemaFormatError(NegativeSpaceError):
    """A schema file cannot be parsed or declares an invalid feature."""

    pass


# Non-fatal conditions


class ArmTooSmall(UserWarning):
    """A treatment arm is too small to grow a tree; a single slice is used."""

    pass


class RowOutsideSpace(UserWarning):
    """Rows of a scoring dataset fall outside every slice of a model."""

    pass
