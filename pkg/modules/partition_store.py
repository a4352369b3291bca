"""
Partition Store Module
Converts partitions and reports to JSON documents and back
"""

import json
import logging
from pathlib import Path

from pydantic import BaseModel, ValidationError

from .errors import PartitionFormatError
from .feature_model import Domain, FeatureKind
from .partition_models import (
    FORMAT_VERSION,
    CandidateRecord,
    ConditioningRecord,
    ConstraintRecord,
    DomainRecord,
    IntervalRecord,
    PartitionDocument,
    SliceRecord,
)
from .positivity_screen import ViolationCandidate
from .slice_geometry import Slice, Subset
from .tree_partitioner import PartitionConfig, PartitionModel

logger = logging.getLogger(__name__)


def constraint_records(S: Slice, domains: dict[str, Domain]) -> list[ConstraintRecord]:
    """Non-complete subsets of a slice in feature order."""
    records = []
    for name in domains:
        subset = S.subsets.get(name)
        if subset is None:
            continue
        if subset.levels is not None:
            records.append(ConstraintRecord(feature=name, levels=sorted(subset.levels)))
        else:
            iv = subset.interval
            records.append(
                ConstraintRecord(
                    feature=name,
                    interval=IntervalRecord(lo=iv.lo, hi=iv.hi, lo_open=iv.lo_open, hi_open=iv.hi_open),
                )
            )
    return records


def _subset_from_record(record: ConstraintRecord, domain: Domain) -> Subset:
    if domain.kind is FeatureKind.NOMINAL:
        if record.levels is None:
            raise PartitionFormatError(f"Constraint on nominal '{record.feature}' needs levels")
        return Subset.of_levels(domain, record.levels)
    if record.interval is None:
        raise PartitionFormatError(f"Constraint on '{record.feature}' needs an interval")
    iv = record.interval
    return Subset.span(domain, iv.lo, iv.hi, iv.lo_open, iv.hi_open)


def model_to_document(model: PartitionModel) -> PartitionDocument:
    conditioning = None
    if model.conditioning is not None:
        conditioning = ConditioningRecord(feature=model.conditioning[0], level=model.conditioning[1])
    return PartitionDocument(
        format_version=FORMAT_VERSION,
        config=model.config.model_dump(mode="json"),
        proxy=dict(model.proxy),
        n_rows=model.n_rows,
        conditioning=conditioning,
        domains=[DomainRecord(**d.model_dump()) for d in model.domains.values()],
        trimmed_rows=list(model.trimmed_rows),
        slices=[
            SliceRecord(
                id=S.id,
                is_empty=S.is_empty,
                support=S.support,
                mean_density=None if S.is_empty else S.mean_density,
                volume=S.volume,
                raw_volume=S.raw_volume,
                carved_on=S.carved_on,
                gap_length=S.gap_length,
                constraints=constraint_records(S, model.domains),
            )
            for S in model.slices
        ],
    )


def document_to_model(document: PartitionDocument) -> PartitionModel:
    if document.format_version != FORMAT_VERSION:
        raise PartitionFormatError(f"Unsupported partition format version {document.format_version}")

    domains = {d.name: Domain(**d.model_dump()) for d in document.domains}
    slices = []
    for record in document.slices:
        subsets = {}
        for constraint in record.constraints:
            if constraint.feature not in domains:
                raise PartitionFormatError(f"Constraint on unknown feature '{constraint.feature}'")
            subsets[constraint.feature] = _subset_from_record(constraint, domains[constraint.feature])
        slices.append(
            Slice(
                subsets=subsets,
                support=record.support,
                mean_density=record.mean_density,
                volume=record.volume,
                raw_volume=record.raw_volume,
                is_empty=record.is_empty,
                id=record.id,
                carved_on=record.carved_on,
                gap_length=record.gap_length,
            )
        )

    conditioning = None
    if document.conditioning is not None:
        conditioning = (document.conditioning.feature, document.conditioning.level)
    return PartitionModel(
        slices=slices,
        domains=domains,
        config=PartitionConfig.model_validate(document.config),
        trimmed_rows=list(document.trimmed_rows),
        n_rows=document.n_rows,
        proxy=dict(document.proxy),
        conditioning=conditioning,
    )


def dump_document(document: BaseModel) -> str:
    """
    Deterministic JSON text of a document.

    Floats are written in their shortest round-trip form, so parsing gives
    back the identical double.
    """
    return json.dumps(document.model_dump(mode="json", exclude_none=True), indent=2) + "\n"


def serialize_partition(model: PartitionModel) -> str:
    return dump_document(model_to_document(model))


def parse_partition(text: str) -> PartitionModel:
    """Partition model from the text of a partition file."""
    try:
        document = PartitionDocument.model_validate_json(text)
    except ValidationError as err:
        raise PartitionFormatError(f"Invalid partition file: {err.error_count()} problem(s)") from err
    return document_to_model(document)


def save_partition(model: PartitionModel, path: Path) -> None:
    Path(path).write_text(serialize_partition(model), encoding="utf-8")
    logger.info(f"Wrote {model.n_slices} slices to {path}")


def load_partition(path: Path) -> PartitionModel:
    return parse_partition(Path(path).read_text(encoding="utf-8"))


def candidate_record(candidate: ViolationCandidate, domains: dict[str, Domain]) -> CandidateRecord:
    return CandidateRecord(
        rules=candidate.rules,
        origin_level=candidate.origin_level,
        origin_slice_id=candidate.origin_slice_id,
        origin_empty=candidate.origin_empty,
        sparsity=candidate.sparsity,
        counts=candidate.counts,
        fractions=candidate.fractions,
        total=candidate.total,
        flagged=candidate.flagged,
        constraints=constraint_records(candidate.base, domains),
    )
