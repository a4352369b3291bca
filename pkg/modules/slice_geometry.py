"""
Slice Geometry Module
Subsets, slices, membership and the fractional length / volume calculus
"""

import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    EmptySubset,
    EpsilonOutOfRange,
    GapNotBoundary,
    GapNotContained,
    ModelDataMismatch,
    TypeMismatch,
)
from .feature_model import Dataset, Domain, FeatureKind

logger = logging.getLogger(__name__)

_EMPTY = np.array([], dtype=float)


@dataclass(frozen=True)
class Interval:
    """Interval with independently open or closed ends."""

    lo: float
    hi: float
    lo_open: bool = False
    hi_open: bool = False

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def admits(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=float)
        above = values > self.lo if self.lo_open else values >= self.lo
        below = values < self.hi if self.hi_open else values <= self.hi
        return above & below

    def count_inside(self, sorted_values: np.ndarray) -> int:
        """Number of sorted distinct values inside the interval."""
        if sorted_values.size == 0:
            return 0
        start = np.searchsorted(sorted_values, self.lo, side="right" if self.lo_open else "left")
        stop = np.searchsorted(sorted_values, self.hi, side="left" if self.hi_open else "right")
        return max(0, int(stop - start))

    def closed(self) -> "Interval":
        return Interval(self.lo, self.hi)


@dataclass(frozen=True)
class Subset:
    """
    Constraint of a slice on one feature.

    Numeric kinds carry an interval (half-integer, closed bounds for integer
    and ordered kinds), nominal features a level set. `complete` marks a
    subset equal to the whole domain.
    """

    feature: str
    kind: FeatureKind
    interval: Interval | None = None
    levels: frozenset[str] | None = None
    complete: bool = False

    @classmethod
    def full(cls, domain: Domain) -> "Subset":
        if domain.kind is FeatureKind.NOMINAL:
            return cls(domain.name, domain.kind, levels=frozenset(domain.levels), complete=True)
        return cls(domain.name, domain.kind, interval=Interval(domain.lo, domain.hi), complete=True)

    @classmethod
    def span(
        cls,
        domain: Domain,
        lo: float,
        hi: float,
        lo_open: bool = False,
        hi_open: bool = False,
    ) -> "Subset":
        """Interval subset of a numeric feature, flagged complete when it spans the domain."""
        if domain.kind.is_discrete:
            lo_open = hi_open = False
        interval = Interval(float(lo), float(hi), lo_open, hi_open)
        covers_lo = lo < domain.lo or (lo == domain.lo and not lo_open)
        covers_hi = hi > domain.hi or (hi == domain.hi and not hi_open)
        return cls(domain.name, domain.kind, interval=interval, complete=covers_lo and covers_hi)

    @classmethod
    def of_levels(cls, domain: Domain, levels: Sequence[str] | frozenset[str]) -> "Subset":
        chosen = frozenset(levels)
        return cls(domain.name, domain.kind, levels=chosen, complete=chosen >= set(domain.levels))

    def admits(self, values: np.ndarray) -> np.ndarray:
        """Vectorised membership."""
        if self.levels is not None:
            return np.isin(np.asarray(values, dtype=object), np.asarray(sorted(self.levels), dtype=object))
        return self.interval.admits(values)

    def admits_value(self, value: object) -> bool:
        if self.levels is not None:
            if not isinstance(value, str):
                raise TypeMismatch(f"{self.feature}: expected a level label, got {value!r}")
            return value in self.levels
        if isinstance(value, (bool, np.bool_)) or not isinstance(value, (int, float, np.number)):
            raise TypeMismatch(f"{self.feature}: expected a number, got {value!r}")
        return bool(self.interval.admits(np.array([value]))[0])


@dataclass(frozen=True)
class Gap:
    """Boundary gap of a subset: one or two contiguous pieces, or a level set."""

    feature: str
    pieces: tuple[Interval, ...] = ()
    levels: frozenset[str] | None = None


@dataclass(frozen=True)
class Slice:
    """
    Hyper-rectangle given by per-feature subsets.

    Only non-complete subsets are stored; a missing feature means the full
    domain.
    """

    subsets: Mapping[str, Subset] = field(default_factory=dict)
    support: int = 0
    mean_density: float | None = None
    volume: float = 1.0
    raw_volume: float = 1.0
    is_empty: bool = False
    id: int = 0
    carved_on: str | None = None
    gap_length: float | None = None

    @property
    def dimension(self) -> int:
        return slice_dimension(self)

    def subset(self, domain: Domain) -> Subset:
        """Subset on a feature, the full domain when unconstrained."""
        return self.subsets.get(domain.name) or Subset.full(domain)

    def constrains(self, feature: str) -> bool:
        return feature in self.subsets

    def with_subset(self, subset: Subset) -> "Slice":
        """Copy with one feature's constraint replaced."""
        subsets = dict(self.subsets)
        if subset.complete:
            subsets.pop(subset.feature, None)
        else:
            subsets[subset.feature] = subset
        return replace(self, subsets=subsets)

    def without(self, feature: str) -> "Slice":
        subsets = {k: v for k, v in self.subsets.items() if k != feature}
        return replace(self, subsets=subsets)


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise EpsilonOutOfRange(f"epsilon must be in (0, 1), got {epsilon}")


def raw_length(s: Subset, d: Domain) -> float:
    """Unadjusted fractional length |s| / |dom|."""
    if s.complete:
        return 1.0
    if s.levels is not None:
        return len(s.levels) / d.size
    return s.interval.width / d.size


def subset_length(s: Subset, d: Domain, unique_values: np.ndarray | None, epsilon: float) -> float:
    """
    Fractional length L(s) of a subset.

    Integer and ordered: width / size. Nominal: |levels| / size. Real:
    (1 - eps) * width / size + eps * n_s / n_j, with n_s the distinct values
    from `unique_values` inside s. A real singleton only has length when it
    holds a value.

    Args:
        s: Subset to measure
        d: Domain of the subset's feature
        unique_values: Sorted distinct values that count towards n_s
        epsilon: Share of length reserved for observed values

    Returns:
        Length in (0, 1]
    """
    _check_epsilon(epsilon)
    if s.complete:
        return 1.0

    if s.levels is not None:
        if not s.levels:
            raise EmptySubset(f"{s.feature}: empty level set")
        return len(s.levels) / d.size

    iv = s.interval
    if d.kind.is_discrete:
        if iv.width <= 0:
            raise EmptySubset(f"{s.feature}: interval [{iv.lo}, {iv.hi}] has no width")
        return iv.width / d.size

    values = _EMPTY if unique_values is None else np.asarray(unique_values, dtype=float)
    n_s = iv.count_inside(values)
    if iv.width < 0 or (iv.width == 0 and (iv.lo_open or iv.hi_open or n_s == 0)):
        raise EmptySubset(f"{s.feature}: interval ({iv.lo}, {iv.hi}) holds no space")
    return (1.0 - epsilon) * iv.width / d.size + epsilon * n_s / d.n_unique


def member_uniques(members: Dataset, domains: Mapping[str, Domain]) -> dict[str, np.ndarray]:
    """Sorted distinct values of each real feature among a slice's members."""
    return {
        name: np.unique(members.column(name).astype(float))
        for name, d in domains.items()
        if d.kind is FeatureKind.REAL and name in members.frame.columns
    }


def slice_volume(
    S: Slice,
    domains: Mapping[str, Domain],
    unique_values: Mapping[str, np.ndarray],
    epsilon: float,
) -> float:
    """Product of subset lengths; unconstrained features contribute 1."""
    _check_epsilon(epsilon)
    volume = 1.0
    for name, subset in S.subsets.items():
        volume *= subset_length(subset, domains[name], unique_values.get(name, _EMPTY), epsilon)
    return volume


def raw_slice_volume(S: Slice, domains: Mapping[str, Domain]) -> float:
    """Product of unadjusted lengths; partitions sum to exactly 1."""
    volume = 1.0
    for name, subset in S.subsets.items():
        volume *= raw_length(subset, domains[name])
    return volume


def slice_dimension(S: Slice) -> int:
    """Number of non-complete subsets."""
    return sum(1 for s in S.subsets.values() if not s.complete)


def slice_contains(
    S: Slice, row: Mapping[str, object], domains: Mapping[str, Domain] | None = None
) -> bool:
    """
    Whether a single record satisfies every constraint of a slice.

    When domains are given, unconstrained features must still lie inside
    their domain.
    """
    for name, subset in S.subsets.items():
        if name not in row:
            raise ModelDataMismatch(f"Row has no value for '{name}'")
        if not subset.admits_value(row[name]):
            return False
    if domains is not None:
        for name, d in domains.items():
            if name in S.subsets:
                continue
            if name not in row:
                raise ModelDataMismatch(f"Row has no value for '{name}'")
            if not Subset.full(d).admits_value(row[name]):
                return False
    return True


def slice_mask(S: Slice, dataset: Dataset, domains: Mapping[str, Domain]) -> np.ndarray:
    """Vectorised membership of every row of a dataset."""
    columns = set(dataset.names)
    missing = [name for name in list(domains) + list(S.subsets) if name not in columns]
    if missing:
        raise ModelDataMismatch(f"Dataset lacks model features: {sorted(set(missing))}")

    mask = np.ones(dataset.n, dtype=bool)
    for name, d in domains.items():
        values = dataset.column(name)
        subset = S.subsets.get(name)
        mask &= subset.admits(values) if subset is not None else d.admits(values)
    return mask


def _within(piece: Interval, outer: Interval, discrete: bool) -> bool:
    if piece.lo < outer.lo or piece.hi > outer.hi or piece.lo > piece.hi:
        return False
    if discrete:
        return True
    if piece.lo == outer.lo and outer.lo_open and not piece.lo_open:
        return False
    if piece.hi == outer.hi and outer.hi_open and not piece.hi_open:
        return False
    return True


def _touches_lo(piece: Interval, outer: Interval, discrete: bool) -> bool:
    return piece.lo == outer.lo and (discrete or piece.lo_open == outer.lo_open)


def _touches_hi(piece: Interval, outer: Interval, discrete: bool) -> bool:
    return piece.hi == outer.hi and (discrete or piece.hi_open == outer.hi_open)


def subset_subtract(s: Subset, gap: Gap) -> tuple[Subset, list[Subset]]:
    """
    Remove boundary gap pieces from a subset.

    Returns:
        Tuple of (remainder, gap pieces as subsets); the remainder and the
        pieces tile `s` exactly.

    Raises:
        GapNotContained: gap empty, outside s, or covering all of s
        GapNotBoundary: a piece sits strictly inside s
    """
    if s.levels is not None:
        if not gap.levels or not gap.levels <= s.levels or gap.levels == s.levels:
            raise GapNotContained(f"{s.feature}: levels {sorted(gap.levels or [])} not a proper part")
        remainder = Subset(s.feature, s.kind, levels=s.levels - gap.levels)
        return remainder, [Subset(s.feature, s.kind, levels=gap.levels)]

    discrete = s.kind.is_discrete
    outer = s.interval
    pieces = sorted(gap.pieces, key=lambda iv: (iv.lo, iv.hi))
    if not pieces or len(pieces) > 2:
        raise GapNotContained(f"{s.feature}: a boundary gap has one or two pieces")

    lo, lo_open, hi, hi_open = outer.lo, outer.lo_open, outer.hi, outer.hi_open
    used_lo = used_hi = False
    for piece in pieces:
        if not _within(piece, outer, discrete):
            raise GapNotContained(f"{s.feature}: piece {piece} lies outside {outer}")
        at_lo = _touches_lo(piece, outer, discrete)
        at_hi = _touches_hi(piece, outer, discrete)
        if at_lo and at_hi:
            raise GapNotContained(f"{s.feature}: gap covers the whole subset")
        if at_lo and not used_lo:
            lo, lo_open, used_lo = piece.hi, not piece.hi_open, True
        elif at_hi and not used_hi:
            hi, hi_open, used_hi = piece.lo, not piece.lo_open, True
        else:
            raise GapNotBoundary(f"{s.feature}: piece {piece} is not on the boundary of {outer}")

    if discrete:
        lo_open = hi_open = False
    if lo > hi or (lo == hi and (discrete or lo_open or hi_open)):
        raise GapNotContained(f"{s.feature}: nothing would remain of {outer}")

    remainder = Subset(s.feature, s.kind, interval=Interval(lo, hi, lo_open, hi_open))
    cut = [
        Subset(s.feature, s.kind, interval=piece.closed() if discrete else piece)
        for piece in pieces
    ]
    return remainder, cut


def _fmt(value: float) -> str:
    text = repr(float(value))
    return text[:-2] if text.endswith(".0") else text


def describe_subset(s: Subset, d: Domain) -> str:
    """Readable rule for one constraint."""
    name = s.feature
    if s.levels is not None:
        return f"{name} in {{{', '.join(sorted(s.levels))}}}"
    iv = s.interval
    if d.kind is FeatureKind.ORDERED and d.levels:
        first, last = d.label_for(iv.lo + 0.5), d.label_for(iv.hi - 0.5)
        return f"{name} = {first}" if first == last else f"{first} <= {name} <= {last}"
    if d.kind is FeatureKind.INTEGER:
        return f"{_fmt(iv.lo)} < {name} < {_fmt(iv.hi)}"
    left = "<" if iv.lo_open else "<="
    right = "<" if iv.hi_open else "<="
    return f"{_fmt(iv.lo)} {left} {name} {right} {_fmt(iv.hi)}"


def describe_slice(S: Slice, domains: Mapping[str, Domain]) -> str:
    """Readable rules of a slice, in feature order."""
    rules = [describe_subset(S.subsets[name], d) for name, d in domains.items() if name in S.subsets]
    return " & ".join(rules) if rules else "(entire space)"


def slice_key(S: Slice) -> tuple:
    """Hashable identity of a slice's geometry."""
    parts = []
    for name in sorted(S.subsets):
        s = S.subsets[name]
        if s.levels is not None:
            parts.append((name, tuple(sorted(s.levels))))
        else:
            iv = s.interval
            parts.append((name, (iv.lo, iv.hi, iv.lo_open, iv.hi_open)))
    return tuple(parts)
