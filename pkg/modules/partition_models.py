"""
Partition Models Module
Pydantic documents for the partition, metrics and positivity-candidate files
"""

from typing import Any

from pydantic import BaseModel, Field

from .feature_model import FeatureKind
from .uniformity_metrics import UniformityReport

FORMAT_VERSION = 1


class IntervalRecord(BaseModel):
    """Numeric constraint bounds."""

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False


class ConstraintRecord(BaseModel):
    """One non-complete subset of a slice."""

    feature: str = Field(..., description="Constrained feature")
    interval: IntervalRecord | None = Field(default=None, description="Bounds (numeric kinds)")
    levels: list[str] | None = Field(default=None, description="Allowed levels (nominal)")


class DomainRecord(BaseModel):
    """Observed domain of one feature."""

    name: str
    kind: FeatureKind
    lo: float | None = None
    hi: float | None = None
    levels: list[str] | None = None
    size: float
    n_unique: int


class SliceRecord(BaseModel):
    """One slice of a partition; empty slices carry no mean density."""

    id: int = Field(..., ge=1)
    is_empty: bool
    support: int = Field(..., ge=0)
    mean_density: float | None = Field(default=None, description="Mean proxy y of the members")
    volume: float = Field(..., description="Adjusted volume")
    raw_volume: float = Field(..., description="Unadjusted volume")
    carved_on: str | None = Field(default=None, description="Feature whose gap produced the slice")
    gap_length: float | None = Field(default=None, description="Length that admitted the gap")
    constraints: list[ConstraintRecord] = Field(default_factory=list)


class ConditioningRecord(BaseModel):
    feature: str
    level: str


class PartitionDocument(BaseModel):
    """Contents of a partition file."""

    format_version: int = Field(default=FORMAT_VERSION)
    config: dict[str, Any] = Field(..., description="PartitionConfig used for the run")
    proxy: dict[str, Any] = Field(default_factory=dict, description="Density proxy and its parameters")
    n_rows: int = Field(..., ge=0, description="Rows the partition was grown on")
    conditioning: ConditioningRecord | None = None
    domains: list[DomainRecord]
    trimmed_rows: list[int] = Field(default_factory=list, description="Rows dropped as outliers")
    slices: list[SliceRecord]


class MetricsDocument(BaseModel):
    """Contents of a metrics file."""

    format_version: int = Field(default=FORMAT_VERSION)
    model: str = Field(..., description="Partition file the metrics refer to")
    data: str = Field(..., description="CSV the occupancy was counted on")
    report: UniformityReport


class CandidateRecord(BaseModel):
    """One positivity candidate."""

    rules: str
    origin_level: str
    origin_slice_id: int
    origin_empty: bool
    sparsity: float | None = None
    counts: dict[str, int]
    fractions: dict[str, float]
    total: int
    flagged: bool
    constraints: list[ConstraintRecord]


class CandidatesDocument(BaseModel):
    """Contents of a positivity-candidates file."""

    format_version: int = Field(default=FORMAT_VERSION)
    treatment: str
    sparsity_quantile: float
    imbalance_ratio: float
    config: dict[str, Any]
    candidates: list[CandidateRecord]
