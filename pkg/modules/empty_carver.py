"""
Empty Carver Module
Carves empty slices out of split gaps and out of the unobserved margins of a slice
"""

import logging
from collections.abc import Mapping
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Literal

import numpy as np

from .errors import EmptySubset
from .feature_model import Dataset, Domain, FeatureKind
from .slice_geometry import Gap, Interval, Slice, Subset, subset_length, subset_subtract

if TYPE_CHECKING:
    from .tree_partitioner import SplitCandidate

logger = logging.getLogger(__name__)

GapGating = Literal["union", "piece"]


@dataclass(frozen=True)
class CarveRules:
    """Thresholds shared by both carving heuristics."""

    min_L: float
    p_star: int
    epsilon: float
    gap_gating: GapGating = "union"


@dataclass(frozen=True)
class BoundaryGap:
    """Unobserved margin of a slice on one feature."""

    gap: Gap
    length: float
    piece_lengths: tuple[float, ...]


def empty_length(s: Subset, d: Domain, epsilon: float) -> float:
    """Length of a subset that holds no observations."""
    try:
        return subset_length(s, d, None, epsilon)
    except EmptySubset:
        return 0.0


def _piece_subset(d: Domain, piece: Interval) -> Subset:
    return Subset(d.name, d.kind, interval=piece.closed() if d.kind.is_discrete else piece)


def _admissible(
    S: Slice, feature: str, gap_length: float, domains: Mapping[str, Domain], rules: CarveRules
) -> bool:
    """Gap gate: length, resulting dimension and every other side of the empty slice."""
    if gap_length <= rules.min_L:
        return False
    dimension = S.dimension + (0 if S.constrains(feature) else 1)
    if dimension > rules.p_star:
        return False
    for name, other in S.subsets.items():
        if name != feature and empty_length(other, domains[name], rules.epsilon) <= rules.min_L:
            return False
    return True


def _empty_slice(S: Slice, piece: Subset, gap_length: float) -> Slice:
    return replace(
        S.with_subset(piece),
        support=0,
        mean_density=None,
        is_empty=True,
        carved_on=piece.feature,
        gap_length=gap_length,
    )


def split_children(
    parent: Slice, split: "SplitCandidate", domains: Mapping[str, Domain]
) -> tuple[Slice, Slice]:
    """Children of a split meeting at the threshold (left closed, right open at t)."""
    d = domains[split.feature]
    base = parent.subset(d)
    if d.kind is FeatureKind.NOMINAL:
        left = Subset.of_levels(d, {split.level})
        right = Subset.of_levels(d, base.levels - {split.level})
    else:
        iv = base.interval
        left = Subset.span(d, iv.lo, split.threshold, iv.lo_open, False)
        right = Subset.span(d, split.threshold, iv.hi, True, iv.hi_open)
    return parent.with_subset(left), parent.with_subset(right)


def carve_at_split(
    parent: Slice,
    split: "SplitCandidate",
    domains: Mapping[str, Domain],
    rules: CarveRules,
) -> tuple[Slice, Slice, Slice | None]:
    """
    Widen a numeric split into an empty slice between the two children.

    The gap (x_L, x_R) between the largest left value and the smallest right
    value (integer kinds: [x_L + 0.5, x_R - 0.5]) is carved when its length
    exceeds min_L and the empty slice passes the dimension and side gates.
    Otherwise the children meet at the threshold.

    Returns:
        Tuple of (left, right, empty slice or None)
    """
    d = domains[split.feature]
    if d.kind is FeatureKind.NOMINAL:
        left, right = split_children(parent, split, domains)
        return left, right, None

    iv = parent.subset(d).interval
    x_l, x_r = split.left_max, split.right_min
    if d.kind.is_discrete:
        gap = Subset.span(d, x_l + 0.5, x_r - 0.5)
        left_hi, right_lo = x_l + 0.5, x_r - 0.5
    else:
        gap = Subset(d.name, d.kind, interval=Interval(x_l, x_r, True, True))
        left_hi, right_lo = x_l, x_r

    length = empty_length(gap, d, rules.epsilon)
    if not _admissible(parent, d.name, length, domains, rules):
        left, right = split_children(parent, split, domains)
        return left, right, None

    left = parent.with_subset(Subset.span(d, iv.lo, left_hi, iv.lo_open, False))
    right = parent.with_subset(Subset.span(d, right_lo, iv.hi, False, iv.hi_open))
    logger.debug(f"Carved split gap on {d.name}: ({x_l}, {x_r}) length {length:.6f}")
    return left, right, _empty_slice(parent, gap, length)


def boundary_gaps(
    S: Slice, members: Dataset, domains: Mapping[str, Domain], epsilon: float
) -> list[BoundaryGap]:
    """
    Per-feature parts of a slice lying outside its members' observed span.

    Numeric kinds give up to two boundary pieces, nominal features the
    unobserved levels. Lengths are measured as empty space (no observed
    values inside).
    """
    gaps = []
    for name, d in domains.items():
        s = S.subset(d)
        values = members.column(name)
        pieces: list[Interval] = []
        levels = None

        if d.kind is FeatureKind.NOMINAL:
            unseen = frozenset(s.levels) - set(values.astype(str))
            if unseen:
                levels = unseen
                lengths = (len(unseen) / d.size,)
        else:
            iv = s.interval
            values = values.astype(float)
            lo, hi = float(np.min(values)), float(np.max(values))
            if d.kind.is_discrete:
                lo, hi = lo - 0.5, hi + 0.5
                if lo > iv.lo:
                    pieces.append(Interval(iv.lo, lo))
                if hi < iv.hi:
                    pieces.append(Interval(hi, iv.hi))
            else:
                if lo > iv.lo:
                    pieces.append(Interval(iv.lo, lo, iv.lo_open, True))
                if hi < iv.hi:
                    pieces.append(Interval(hi, iv.hi, True, iv.hi_open))
            lengths = tuple(empty_length(_piece_subset(d, p), d, epsilon) for p in pieces)

        if pieces or levels:
            gaps.append(BoundaryGap(Gap(name, tuple(pieces), levels), float(sum(lengths)), lengths))
    return gaps


def _candidates(report: BoundaryGap, gating: GapGating) -> list[tuple[float, Gap]]:
    if gating == "union" or report.gap.levels is not None:
        return [(report.length, report.gap)]
    return [
        (length, Gap(report.gap.feature, (piece,)))
        for piece, length in zip(report.gap.pieces, report.piece_lengths)
    ]


def carve_after_split(
    S: Slice, members: Dataset, domains: Mapping[str, Domain], rules: CarveRules
) -> tuple[Slice, list[Slice]]:
    """
    Trim a slice's empty margins, largest gap first.

    A gap is carved while its length exceeds min_L, the trimmed slice stays
    within p_star dimensions and every other side of the empty slice exceeds
    min_L. Gaps are recomputed after each trim.

    Returns:
        Tuple of (trimmed slice, emitted empty slices)
    """
    current = S
    empties: list[Slice] = []
    while True:
        best: tuple[float, Gap] | None = None
        for report in boundary_gaps(current, members, domains, rules.epsilon):
            for length, gap in _candidates(report, rules.gap_gating):
                if not _admissible(current, gap.feature, length, domains, rules):
                    continue
                if best is None or length > best[0]:
                    best = (length, gap)
        if best is None:
            break

        length, gap = best
        d = domains[gap.feature]
        remainder, pieces = subset_subtract(current.subset(d), gap)
        for piece in pieces:
            empties.append(_empty_slice(current, piece, length))
        current = current.with_subset(remainder)
        logger.debug(f"Trimmed empty margin on {gap.feature} of length {length:.6f}")

    return current, empties
