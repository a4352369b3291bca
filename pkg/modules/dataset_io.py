"""
Dataset IO Module
Reads schema files and CSV tables into validated datasets
"""

import json
import logging
from collections.abc import Mapping
from pathlib import Path

import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from .errors import HeaderMismatch, ModelDataMismatch, SchemaFormatError
from .feature_model import (
    Dataset,
    Domain,
    FeatureKind,
    FeatureSchema,
    check_unique_names,
    validate_dataset,
)

logger = logging.getLogger(__name__)


class SchemaDocument(BaseModel):
    """Schema file: the dataset's features in column order."""

    features: list[FeatureSchema] = Field(..., min_length=1)


def parse_schema(text: str) -> list[FeatureSchema]:
    """Features from schema JSON; a bare list of features is also accepted."""
    try:
        raw = json.loads(text)
        if isinstance(raw, list):
            raw = {"features": raw}
        features = SchemaDocument.model_validate(raw).features
    except (json.JSONDecodeError, ValidationError) as err:
        raise SchemaFormatError(f"Invalid schema: {err}") from err
    check_unique_names(features)
    return features


def load_schema(path: Path) -> list[FeatureSchema]:
    return parse_schema(Path(path).read_text(encoding="utf-8"))


def _read_raw(path: Path) -> pd.DataFrame:
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError as err:
        raise HeaderMismatch(f"{path}: no header row") from err
    except pd.errors.ParserError as err:
        raise HeaderMismatch(f"{path}: {err}") from err


def read_table(path: Path, schema: list[FeatureSchema]) -> Dataset:
    """
    Read a CSV file and validate it against a schema.

    Cells are read as text so blanks and malformed numbers are reported by
    validation rather than coerced.
    """
    dataset = validate_dataset(_read_raw(path), schema)
    logger.info(f"Loaded {dataset.n} rows, {dataset.p} features from {path}")
    return dataset


def write_table(dataset: Dataset, path: Path) -> None:
    """Write rows back as CSV with ordered codes turned into labels."""
    dataset.labelled_frame().to_csv(path, index=False)


def schema_from_domains(domains: Mapping[str, Domain]) -> list[FeatureSchema]:
    """Feature declarations recovered from a model's domains."""
    return [
        FeatureSchema(
            name=d.name,
            kind=d.kind,
            ordered_levels=list(d.levels) if d.kind is FeatureKind.ORDERED else None,
        )
        for d in domains.values()
    ]


def read_for_model(
    path: Path, domains: Mapping[str, Domain], schema: list[FeatureSchema] | None = None
) -> Dataset:
    """
    Read a CSV for scoring against an existing partition.

    Only the model's features are kept; ordered labels are coded against the
    model's level windows. Without a schema the declarations come from the
    domains, so ordered labels must lie inside the model's window.
    """
    raw = _read_raw(path)
    missing = [name for name in domains if name not in raw.columns]
    if missing:
        raise ModelDataMismatch(f"{path} lacks model features: {missing}")

    declared = {f.name: f for f in (schema or schema_from_domains(domains))}
    features = [declared.get(name) or schema_from_domains({name: d})[0] for name, d in domains.items()]
    windows = {name: d.levels for name, d in domains.items() if d.kind is FeatureKind.ORDERED}
    dataset = validate_dataset(raw[list(domains)], features, windows=windows)
    logger.info(f"Loaded {dataset.n} rows from {path} for scoring")
    return dataset
