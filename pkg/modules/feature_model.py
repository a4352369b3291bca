"""
Feature Model Module
Feature kinds, observed domains, ordered-level recoding and dataset validation
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import (
    HeaderMismatch,
    MissingValue,
    SingleValuedFeature,
    TypeMismatch,
    UnknownLevel,
)

logger = logging.getLogger(__name__)


class FeatureKind(str, Enum):
    """How a feature's values are ordered and measured."""

    REAL = "real"
    INTEGER = "integer"
    NOMINAL = "nominal"
    ORDERED = "ordered"

    @property
    def is_numeric(self) -> bool:
        """Real, integer and ordered features live on a line."""
        return self is not FeatureKind.NOMINAL

    @property
    def is_discrete(self) -> bool:
        """Integer and ordered features use half-integer bounds."""
        return self in (FeatureKind.INTEGER, FeatureKind.ORDERED)


class FeatureSchema(BaseModel):
    """Declared name and kind of one dataset column."""

    model_config = ConfigDict(frozen=True)

    name: str = Field(..., min_length=1, description="Column name")
    kind: FeatureKind = Field(..., description="real | integer | nominal | ordered")
    ordered_levels: list[str] | None = Field(
        default=None, description="Level labels in increasing order (ordered kind only)"
    )

    @model_validator(mode="after")
    def _check_levels(self) -> "FeatureSchema":
        if self.kind is FeatureKind.ORDERED:
            if not self.ordered_levels or len(set(self.ordered_levels)) < 2:
                raise ValueError(f"{self.name}: ordered features need >= 2 distinct levels")
            if len(set(self.ordered_levels)) != len(self.ordered_levels):
                raise ValueError(f"{self.name}: ordered levels must be unique")
        elif self.ordered_levels is not None:
            raise ValueError(f"{self.name}: ordered_levels is only valid for ordered features")
        return self


def check_unique_names(schema: Sequence[FeatureSchema]) -> None:
    """Reject schemas that repeat a feature name."""
    seen: set[str] = set()
    for feature in schema:
        if feature.name in seen:
            raise HeaderMismatch(f"Duplicate feature name in schema: {feature.name}")
        seen.add(feature.name)


class Domain(BaseModel):
    """
    Observed domain of one feature.

    Numeric kinds carry bounds (half-integers for integer and ordered kinds),
    nominal features carry their level set. Ordered features also carry the
    label window so codes can be shown as labels.
    """

    model_config = ConfigDict(frozen=True)

    name: str
    kind: FeatureKind
    lo: float | None = None
    hi: float | None = None
    levels: list[str] | None = None
    size: float = Field(..., gt=0)
    n_unique: int = Field(..., ge=2)

    def admits(self, values: np.ndarray) -> np.ndarray:
        """Mask of values that lie inside the domain."""
        if self.kind is FeatureKind.NOMINAL:
            return np.isin(values, np.asarray(self.levels, dtype=object))
        values = np.asarray(values, dtype=float)
        if self.kind is FeatureKind.REAL:
            return (values >= self.lo) & (values <= self.hi)
        return (values > self.lo) & (values < self.hi)

    def label_for(self, code: float) -> str:
        """Label of an ordered code inside this domain."""
        offset = int(round(code - (self.lo + 0.5)))
        return self.levels[offset]


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    Typed table of n records over a feature schema.

    Real columns are float64, integer and ordered columns int64 (ordered values
    are codes relative to the first level of the window in `level_maps`, so
    labels below a scoring window get negative codes), nominal columns hold
    string labels. The frame index keeps the original row numbers.
    """

    schema: tuple[FeatureSchema, ...]
    frame: pd.DataFrame
    level_maps: Mapping[str, tuple[str, ...]] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.frame)

    @property
    def p(self) -> int:
        return len(self.schema)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.schema]

    @property
    def row_ids(self) -> np.ndarray:
        """Original row numbers of the records."""
        return self.frame.index.to_numpy()

    def feature(self, name: str) -> FeatureSchema:
        for f in self.schema:
            if f.name == name:
                return f
        raise KeyError(name)

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy()

    def take(self, positions: Sequence[int] | np.ndarray) -> "Dataset":
        """Rows at the given positions, original row numbers preserved."""
        return Dataset(self.schema, self.frame.iloc[np.asarray(positions, dtype=int)], self.level_maps)

    def select(self, mask: np.ndarray) -> "Dataset":
        return Dataset(self.schema, self.frame[np.asarray(mask, dtype=bool)], self.level_maps)

    def drop_features(self, names: Sequence[str]) -> "Dataset":
        drop = set(names)
        schema = tuple(f for f in self.schema if f.name not in drop)
        maps = {k: v for k, v in self.level_maps.items() if k not in drop}
        return Dataset(schema, self.frame.drop(columns=list(drop)), maps)

    def row(self, position: int) -> dict[str, object]:
        """One record as a name -> value mapping."""
        record = self.frame.iloc[position]
        return {name: record[name] for name in self.names}

    def labelled_frame(self) -> pd.DataFrame:
        """Frame with ordered codes turned back into their labels."""
        out = self.frame.copy()
        for name, window in self.level_maps.items():
            levels = self.feature(name).ordered_levels
            offset = levels.index(window[0])
            out[name] = [levels[offset + int(code)] for code in out[name]]
        return out


def recode_ordered(
    column: Sequence[str] | np.ndarray, ordered_levels: Sequence[str]
) -> tuple[np.ndarray, tuple[str, ...]]:
    """
    Recode ordered labels to integer codes.

    With l_a and l_b the lowest and highest observed levels, observed values
    map into 0..b-a. Unobserved levels between them keep their codes.

    Returns:
        Tuple of (codes, labels of the window l_a..l_b)
    """
    position = {label: i for i, label in enumerate(ordered_levels)}
    labels = [str(v) for v in column]
    unknown = sorted({v for v in labels if v not in position})
    if unknown:
        raise UnknownLevel(f"Labels not in ordered_levels: {', '.join(unknown)}")

    raw = np.array([position[v] for v in labels], dtype=np.int64)
    if len(np.unique(raw)) < 2:
        raise SingleValuedFeature("Ordered feature has fewer than 2 observed levels")
    a, b = int(raw.min()), int(raw.max())
    return raw - a, tuple(ordered_levels[a : b + 1])


def compute_domain(
    column: Sequence | np.ndarray,
    schema: FeatureSchema,
    labels: Sequence[str] | None = None,
) -> Domain:
    """
    Observed domain of a column.

    Args:
        column: Typed values (ordered features as codes)
        schema: Feature declaration
        labels: Code -> label window for ordered features

    Returns:
        Domain with size and unique-value count populated
    """
    values = np.asarray(column, dtype=object if schema.kind is FeatureKind.NOMINAL else None)
    if values.size == 0:
        raise SingleValuedFeature(f"{schema.name}: empty column")

    if schema.kind is FeatureKind.NOMINAL:
        if not all(isinstance(v, str) for v in values):
            raise TypeMismatch(f"{schema.name}: nominal values must be labels")
        levels = sorted(set(values))
        if len(levels) < 2:
            raise SingleValuedFeature(f"{schema.name}: only one observed level")
        return Domain(
            name=schema.name, kind=schema.kind, levels=levels, size=float(len(levels)), n_unique=len(levels)
        )

    if not np.issubdtype(values.dtype, np.number) or np.issubdtype(values.dtype, np.bool_):
        raise TypeMismatch(f"{schema.name}: {schema.kind.value} values must be numeric")
    values = values.astype(float)
    if not np.all(np.isfinite(values)):
        raise TypeMismatch(f"{schema.name}: non-finite values")
    if schema.kind.is_discrete and not np.all(values == np.round(values)):
        raise TypeMismatch(f"{schema.name}: {schema.kind.value} values must be whole numbers")

    n_unique = len(np.unique(values))
    if n_unique < 2:
        raise SingleValuedFeature(f"{schema.name}: only one observed value")

    lo, hi = float(values.min()), float(values.max())
    window = None
    if schema.kind.is_discrete:
        if schema.kind is FeatureKind.ORDERED and labels is not None:
            window = list(labels[int(lo) : int(hi) + 1])
        lo, hi = lo - 0.5, hi + 0.5
    return Domain(
        name=schema.name, kind=schema.kind, lo=lo, hi=hi, levels=window, size=hi - lo, n_unique=n_unique
    )


def compute_domains(dataset: Dataset) -> dict[str, Domain]:
    """Domains of every feature, in schema order."""
    return {
        f.name: compute_domain(dataset.column(f.name), f, dataset.level_maps.get(f.name))
        for f in dataset.schema
    }


def constant_features(dataset: Dataset) -> list[str]:
    """Features with fewer than two distinct values."""
    return [f.name for f in dataset.schema if dataset.frame[f.name].nunique() < 2]


def drop_constant_features(dataset: Dataset) -> Dataset:
    """Remove single-valued features, warning about each."""
    constant = constant_features(dataset)
    for name in constant:
        logger.warning(f"Dropping single-valued feature '{name}'")
    return dataset.drop_features(constant) if constant else dataset


def _missing_mask(series: pd.Series) -> np.ndarray:
    as_text = series.astype(str).str.strip()
    return (series.isna() | as_text.eq("") | as_text.str.lower().eq("nan")).to_numpy()


def _first_row(frame: pd.DataFrame, mask: np.ndarray) -> int:
    return int(frame.index[np.flatnonzero(mask)[0]])


def validate_dataset(
    raw: pd.DataFrame,
    schema: Sequence[FeatureSchema],
    windows: Mapping[str, Sequence[str]] | None = None,
) -> Dataset:
    """
    Type and check a raw table against its schema.

    Columns are reordered to schema order, constant columns are dropped with a
    warning and ordered labels are recoded. Row numbers in errors are 0-based
    data rows.

    With `windows` (ordered feature -> level window of an existing model) no
    column is dropped and ordered labels are coded relative to the window's
    first level, so rows line up with that model's domains.

    Raises:
        HeaderMismatch, MissingValue, TypeMismatch, UnknownLevel
    """
    schema = tuple(schema)
    check_unique_names(schema)
    names = [f.name for f in schema]
    header = [str(c) for c in raw.columns]
    if len(header) != len(set(header)) or set(header) != set(names):
        raise HeaderMismatch(f"Header {header} does not match schema {names}")

    raw = raw.reset_index(drop=True)
    typed: dict[str, pd.Series] = {}
    for feature in schema:
        series = raw[feature.name]
        missing = _missing_mask(series)
        if missing.any():
            raise MissingValue(_first_row(raw, missing), feature.name)

        if feature.kind in (FeatureKind.REAL, FeatureKind.INTEGER):
            numbers = pd.to_numeric(series.astype(str).str.strip(), errors="coerce").to_numpy(dtype=float)
            bad = ~np.isfinite(numbers)
            if feature.kind is FeatureKind.INTEGER:
                bad |= np.isfinite(numbers) & (numbers != np.round(numbers))
            if bad.any():
                row = _first_row(raw, bad)
                raise TypeMismatch(
                    f"Row {row}, column '{feature.name}': {series.iloc[row]!r} is not {feature.kind.value}"
                )
            if feature.kind is FeatureKind.INTEGER:
                typed[feature.name] = pd.Series(numbers.astype(np.int64))
            else:
                typed[feature.name] = pd.Series(numbers)
        else:
            typed[feature.name] = series.astype(str).str.strip()

    frame = pd.DataFrame(typed, columns=names)
    if windows is not None:
        return _recode_to_windows(Dataset(schema, frame), windows)
    dataset = drop_constant_features(Dataset(schema, frame))

    level_maps: dict[str, tuple[str, ...]] = {}
    frame = dataset.frame.copy()
    for feature in dataset.schema:
        if feature.kind is FeatureKind.ORDERED:
            codes, window = recode_ordered(frame[feature.name].to_numpy(), feature.ordered_levels)
            frame[feature.name] = codes
            level_maps[feature.name] = window
    logger.debug(f"Validated dataset: n={len(frame)}, p={len(dataset.schema)}")
    return Dataset(dataset.schema, frame, level_maps)


def _recode_to_windows(dataset: Dataset, windows: Mapping[str, Sequence[str]]) -> Dataset:
    frame = dataset.frame.copy()
    level_maps: dict[str, tuple[str, ...]] = {}
    for feature in dataset.schema:
        if feature.kind is not FeatureKind.ORDERED:
            continue
        position = {label: i for i, label in enumerate(feature.ordered_levels)}
        first = windows[feature.name][0]
        unknown = sorted({v for v in frame[feature.name] if v not in position})
        if unknown or first not in position:
            labels = ", ".join(unknown or [first])
            raise UnknownLevel(f"{feature.name}: labels not in ordered_levels: {labels}")
        offset = position[first]
        frame[feature.name] = np.array([position[v] - offset for v in frame[feature.name]], dtype=np.int64)
        level_maps[feature.name] = tuple(feature.ordered_levels[offset:])
    return Dataset(dataset.schema, frame, level_maps)
