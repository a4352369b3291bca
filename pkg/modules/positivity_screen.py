"""
Positivity Screen Module
Finds slices that are sparse in one treatment arm but populated in another
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np
from pydantic import BaseModel, Field

from .feature_model import Dataset, Domain, compute_domains
from .slice_geometry import Slice, describe_slice, slice_key, slice_mask
from .tree_partitioner import PartitionConfig, conditioned_partition

logger = logging.getLogger(__name__)


@dataclass
class ViolationCandidate:
    """A base slice (treatment constraint removed) with its per-arm support."""

    base: Slice
    rules: str
    origin_level: str
    origin_slice_id: int
    origin_empty: bool
    sparsity: float | None
    counts: dict[str, int] = field(default_factory=dict)
    fractions: dict[str, float] = field(default_factory=dict)
    flagged: bool = False

    @property
    def total(self) -> int:
        return sum(self.counts.values())


class RemovalReport(BaseModel):
    """Rows dropped by removing the flagged slices."""

    removed_per_arm: dict[str, int]
    removed_total: int = Field(..., ge=0)
    n_before: int = Field(..., ge=0)
    n_after: int = Field(..., ge=0)
    slices_removed: int = Field(..., ge=0)


def _arm_labels(dataset: Dataset, treatment: str) -> np.ndarray:
    return dataset.labelled_frame()[treatment].astype(str).to_numpy()


def is_imbalanced(fractions: Sequence[float], counts: Sequence[int], ratio: float) -> bool:
    """Max/min arm fraction at or above ratio; a zero arm counts when another arm is populated."""
    if not any(counts):
        return False
    low, high = min(fractions), max(fractions)
    if low == 0:
        return high > 0
    return high / low >= ratio


def screen_positivity(
    dataset: Dataset,
    treatment: str,
    config: PartitionConfig | None = None,
    sparsity_quantile: float = 0.25,
    imbalance_ratio: float = 5.0,
) -> list[ViolationCandidate]:
    """
    Propose positivity-violating slices.

    Each arm is partitioned with the treatment as a forced first split. The
    sparsest non-empty slices of an arm (mean y in the top sparsity_quantile)
    and all of its empty slices become candidates once the treatment
    constraint is removed; their supports are then counted in every arm.

    Raises:
        NotCategorical: treatment is not a categorical feature
    """
    if not 0.0 < sparsity_quantile < 1.0:
        raise ValueError(f"sparsity_quantile must be in (0, 1), got {sparsity_quantile}")
    if imbalance_ratio <= 1.0:
        raise ValueError(f"imbalance_ratio must exceed 1, got {imbalance_ratio}")

    arms = conditioned_partition(dataset, config, treatment)
    domains = arms[0][1].domains
    labels = _arm_labels(dataset, treatment)
    arm_sizes = {level: int(np.sum(labels == level)) for level, _ in arms}

    candidates: list[ViolationCandidate] = []
    seen: set[tuple] = set()
    for level, model in arms:
        dense = [s for s in model.slices if not s.is_empty and s.mean_density is not None]
        cutoff = np.quantile([s.mean_density for s in dense], 1.0 - sparsity_quantile) if dense else None
        chosen = [s for s in dense if s.mean_density >= cutoff]
        chosen += [s for s in model.slices if s.is_empty]

        for S in chosen:
            base = S.without(treatment)
            key = slice_key(base)
            if key in seen:
                continue
            seen.add(key)

            inside = slice_mask(base, dataset, domains)
            counts = {arm: int(np.sum(inside & (labels == arm))) for arm, _ in arms}
            fractions = {
                arm: counts[arm] / arm_sizes[arm] if arm_sizes[arm] else 0.0 for arm in counts
            }
            candidates.append(
                ViolationCandidate(
                    base=base,
                    rules=describe_slice(base, domains),
                    origin_level=level,
                    origin_slice_id=S.id,
                    origin_empty=S.is_empty,
                    sparsity=S.mean_density,
                    counts=counts,
                    fractions=fractions,
                    flagged=is_imbalanced(list(fractions.values()), list(counts.values()), imbalance_ratio),
                )
            )

    flagged = sum(c.flagged for c in candidates)
    logger.info(f"Positivity screen: {len(candidates)} candidates, {flagged} flagged")
    return candidates


def remove_slices(
    dataset: Dataset,
    candidates: Sequence[ViolationCandidate],
    treatment: str,
    domains: Mapping[str, Domain] | None = None,
) -> tuple[Dataset, RemovalReport]:
    """
    Drop every row inside the union of the flagged base slices.

    Returns:
        Tuple of (remaining rows, removal report)
    """
    domains = domains or compute_domains(dataset)
    flagged = [c for c in candidates if c.flagged]
    removed = np.zeros(dataset.n, dtype=bool)
    for candidate in flagged:
        removed |= slice_mask(candidate.base, dataset, domains)

    labels = _arm_labels(dataset, treatment)
    per_arm = {str(level): int(np.sum(removed & (labels == level))) for level in np.unique(labels)}
    report = RemovalReport(
        removed_per_arm=per_arm,
        removed_total=int(removed.sum()),
        n_before=dataset.n,
        n_after=int((~removed).sum()),
        slices_removed=len(flagged),
    )
    logger.info(f"Removed {report.removed_total} rows in {len(flagged)} slices")
    return dataset.select(~removed), report
