"""
Tree Partitioner Module
Grows a regression tree on the density target and assembles the slice partition
"""

import logging
import math
import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field, replace
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .density_proxy import ProxySettings, compute_density, numeric_ranges, trim_outliers
from .empty_carver import CarveRules, carve_after_split, carve_at_split
from .errors import ArmTooSmall, ModelDataMismatch, NotCategorical, TooFewRows
from .feature_model import (
    Dataset,
    Domain,
    FeatureKind,
    compute_domains,
    drop_constant_features,
)
from .slice_geometry import (
    Slice,
    Subset,
    member_uniques,
    raw_slice_volume,
    slice_mask,
    slice_volume,
)

logger = logging.getLogger(__name__)


class PartitionConfig(BaseModel):
    """Parameters of a partitioning run."""

    model_config = ConfigDict(frozen=True)

    p_star: int = Field(default=3, ge=1, description="Maximum slice dimension")
    min_L: float = Field(default=0.1, ge=0.0, le=1.0, description="Minimum carved gap length")
    min_slice_size_frac: float = Field(
        default=0.1, ge=0.0, le=1.0, description="Minimum leaf support as a fraction of n"
    )
    epsilon: float = Field(default=0.001, gt=0.0, lt=1.0, description="Length share of observed values")
    min_mse_decrease_frac: float = Field(
        default=0.01, ge=0.0, le=1.0, description="Minimum MSE decrease as a fraction of Var(y)"
    )
    trim_fraction: float = Field(default=0.01, ge=0.0, lt=1.0, description="Sparsest rows dropped")
    gap_gating: Literal["union", "piece"] = Field(
        default="union", description="Gate boundary gaps by union length or per piece"
    )
    proxy: ProxySettings = Field(default_factory=ProxySettings)
    seed: int = Field(default=0, description="Seed for randomised proxies")

    def carve_rules(self) -> CarveRules:
        return CarveRules(self.min_L, self.p_star, self.epsilon, self.gap_gating)

    def min_leaf(self, n: int) -> int:
        """Smallest support a non-empty leaf may have."""
        return max(2, math.ceil(self.min_slice_size_frac * n - 1e-9))


@dataclass(frozen=True)
class SplitCandidate:
    """Best split of one node on one feature."""

    feature: str
    feature_index: int
    child_sse: float
    decrease: float
    left_support: int
    right_support: int
    threshold: float | None = None
    left_max: float | None = None
    right_min: float | None = None
    level: str | None = None


@dataclass
class PartitionModel:
    """
    Slices tiling the feature space of a dataset.

    Non-empty slices come first (depth-first order), then empty slices in the
    order they were carved. Ids run from 1.
    """

    slices: list[Slice]
    domains: dict[str, Domain]
    config: PartitionConfig
    trimmed_rows: list[int] = field(default_factory=list)
    n_rows: int = 0
    proxy: dict[str, object] = field(default_factory=dict)
    conditioning: tuple[str, str] | None = None

    @property
    def features(self) -> list[str]:
        return list(self.domains)

    @property
    def n_slices(self) -> int:
        return len(self.slices)

    def occupancy(self) -> np.ndarray:
        """Fraction of the defining rows in each slice."""
        supports = np.array([s.support for s in self.slices], dtype=float)
        return supports / self.n_rows if self.n_rows else supports

    def assign(self, dataset: Dataset) -> np.ndarray:
        """Position of the slice holding each row, -1 when outside every slice."""
        missing = [name for name in self.domains if name not in dataset.names]
        if missing:
            raise ModelDataMismatch(f"Dataset lacks model features: {missing}")
        owner = np.full(dataset.n, -1, dtype=int)
        for k, S in enumerate(self.slices):
            owner[slice_mask(S, dataset, self.domains) & (owner < 0)] = k
        return owner


def _real_threshold(a: float, b: float) -> float:
    t = (float(np.float32(a)) + float(np.float32(b))) / 2.0
    if not a < t < b:
        t = (a + b) / 2.0
    return t


def _discrete_threshold(a: float, b: float) -> float:
    t = (a + b) / 2.0
    return t - 0.5 if t == math.floor(t) else t


def _scan_numeric(values: np.ndarray, yc: np.ndarray, min_leaf: int) -> tuple[int, float] | None:
    """Best cut position on sorted values, as (left count, child SSE)."""
    n = values.size
    cs1 = np.cumsum(yc)[:-1]
    cs2 = np.cumsum(yc * yc)[:-1]
    total1, total2 = float(np.sum(yc)), float(np.sum(yc * yc))
    k = np.arange(1, n, dtype=float)
    sse = (cs2 - cs1 * cs1 / k) + ((total2 - cs2) - (total1 - cs1) ** 2 / (n - k))

    legal = values[1:] > values[:-1]
    legal &= (k >= min_leaf) & (n - k >= min_leaf)
    if not legal.any():
        return None
    sse = np.where(legal, sse, np.inf)
    best = int(np.argmin(sse))
    return best + 1, float(sse[best])


def _sse(yc: np.ndarray) -> float:
    return float(np.sum((yc - yc.mean()) ** 2)) if yc.size else 0.0


def best_split(
    node: Slice,
    members: Dataset,
    y: np.ndarray,
    domains: Mapping[str, Domain],
    config: PartitionConfig,
    n_total: int,
    var_y: float,
) -> SplitCandidate | None:
    """
    Exhaustive split search for a node.

    Numeric kinds try every midpoint between consecutive distinct values,
    nominal features each observed level against the rest. Candidates must
    leave min_leaf rows on both sides, keep the dimension within p_star and
    reduce the model MSE by at least min_mse_decrease_frac * Var(y). Ties go
    to the earlier feature, then the lower threshold or first level.
    """
    n = members.n
    min_leaf = config.min_leaf(n_total)
    if n < 2 * min_leaf:
        return None

    yc = y - y.mean()
    parent_sse = _sse(yc)
    floor = config.min_mse_decrease_frac * var_y
    best: SplitCandidate | None = None

    for index, (name, d) in enumerate(domains.items()):
        if not node.constrains(name) and node.dimension + 1 > config.p_star:
            continue
        values = members.column(name)

        if d.kind is FeatureKind.NOMINAL:
            candidate = None
            for level in sorted(set(values.astype(str))):
                left = values == level
                count = int(left.sum())
                if count < min_leaf or n - count < min_leaf:
                    continue
                sse = _sse(yc[left]) + _sse(yc[~left])
                if candidate is None or sse < candidate.child_sse:
                    candidate = SplitCandidate(
                        name, index, sse, (parent_sse - sse) / n_total, count, n - count, level=level
                    )
        else:
            values = values.astype(float)
            order = np.argsort(values, kind="stable")
            ordered = values[order]
            found = _scan_numeric(ordered, yc[order], min_leaf)
            if found is None:
                continue
            count, sse = found
            a, b = float(ordered[count - 1]), float(ordered[count])
            t = _discrete_threshold(a, b) if d.kind.is_discrete else _real_threshold(a, b)
            candidate = SplitCandidate(
                name, index, sse, (parent_sse - sse) / n_total, count, n - count,
                threshold=t, left_max=a, right_min=b,
            )

        if candidate is None or candidate.decrease <= 0 or candidate.decrease < floor:
            continue
        if best is None or candidate.child_sse < best.child_sse:
            best = candidate
    return best


def _split_mask(split: SplitCandidate, members: Dataset) -> np.ndarray:
    values = members.column(split.feature)
    if split.level is not None:
        return values == split.level
    return values.astype(float) <= split.threshold


def _finish_leaf(
    S: Slice, members: Dataset, y: np.ndarray, domains: Mapping[str, Domain], epsilon: float
) -> Slice:
    return replace(
        S,
        support=members.n,
        mean_density=float(y.mean()) if y.size else None,
        volume=slice_volume(S, domains, member_uniques(members, domains), epsilon),
        raw_volume=raw_slice_volume(S, domains),
        is_empty=False,
    )


def _finish_empty(S: Slice, domains: Mapping[str, Domain], epsilon: float) -> Slice:
    return replace(
        S,
        volume=slice_volume(S, domains, {}, epsilon),
        raw_volume=raw_slice_volume(S, domains),
    )


def grow_tree(
    root: Slice,
    members: Dataset,
    y: np.ndarray,
    domains: Mapping[str, Domain],
    config: PartitionConfig,
    carved: list[Slice] | None = None,
) -> tuple[list[Slice], list[Slice]]:
    """
    Depth-first growth from a root slice, left child first.

    Each accepted split is widened by carve_at_split and both children are
    trimmed by carve_after_split before they are grown further.

    Returns:
        Tuple of (leaves in depth-first order, empty slices in creation order)
    """
    rules = config.carve_rules()
    n_total = members.n
    var_y = float(np.var(y)) if y.size else 0.0
    leaves: list[Slice] = []
    empties: list[Slice] = list(carved or [])

    stack: list[tuple[Slice, np.ndarray]] = [(root, np.arange(members.n))]
    while stack:
        node, idx = stack.pop()
        node_rows = members.take(idx)
        split = best_split(node, node_rows, y[idx], domains, config, n_total, var_y)
        if split is None:
            leaves.append(_finish_leaf(node, node_rows, y[idx], domains, config.epsilon))
            continue

        logger.debug(
            f"Split on {split.feature} at {split.level if split.level is not None else split.threshold} "
            f"({split.left_support} | {split.right_support})"
        )
        left, right, gap = carve_at_split(node, split, domains, rules)
        if gap is not None:
            empties.append(gap)

        go_left = _split_mask(split, node_rows)
        children = []
        for child, child_idx in ((left, idx[go_left]), (right, idx[~go_left])):
            child, margins = carve_after_split(child, members.take(child_idx), domains, rules)
            empties.extend(margins)
            children.append((child, child_idx))
        stack.append(children[1])
        stack.append(children[0])

    return leaves, [_finish_empty(S, domains, config.epsilon) for S in empties]


def number_slices(leaves: list[Slice], empties: list[Slice]) -> list[Slice]:
    return [replace(S, id=k) for k, S in enumerate(leaves + empties, start=1)]


def check_epsilon(dataset: Dataset, domains: Mapping[str, Domain], epsilon: float) -> None:
    """Warn when epsilon is not below the smallest gap fraction of a real feature."""
    for name, d in domains.items():
        if d.kind is not FeatureKind.REAL:
            continue
        distinct = np.unique(dataset.column(name).astype(float))
        if distinct.size < 2:
            continue
        smallest = float(np.min(np.diff(distinct))) / d.size
        if epsilon >= smallest:
            logger.warning(
                f"epsilon={epsilon} is not below the smallest gap fraction {smallest:.3g} of '{name}'"
            )


def _proxy_echo(target) -> dict[str, object]:
    return {"method": target.method.value, **target.params}


def build_partition(dataset: Dataset, config: PartitionConfig | None = None) -> PartitionModel:
    """
    Partition a dataset's feature space into dense and empty slices.

    Pipeline: density proxy, outlier trim, domains of the kept rows, tree
    growth with carving, slice numbering.

    Raises:
        TooFewRows: fewer rows than two minimum leaves
    """
    config = config or PartitionConfig()
    if dataset.n < 2 * config.min_leaf(dataset.n):
        raise TooFewRows(f"{dataset.n} rows cannot form two leaves of {config.min_leaf(dataset.n)}")

    target = compute_density(dataset, config.proxy, config.seed)
    kept_rows, kept = trim_outliers(dataset, target, config.trim_fraction)
    trimmed_rows = sorted(int(r) for r in np.setdiff1d(dataset.row_ids, kept_rows.row_ids))
    kept_rows = drop_constant_features(kept_rows)
    y = target.values[kept]

    if kept_rows.n < 2 * config.min_leaf(kept_rows.n):
        raise TooFewRows(f"{kept_rows.n} rows left after trimming")

    domains = compute_domains(kept_rows)
    check_epsilon(kept_rows, domains, config.epsilon)
    leaves, empties = grow_tree(Slice(), kept_rows, y, domains, config)
    model = PartitionModel(
        slices=number_slices(leaves, empties),
        domains=domains,
        config=config,
        trimmed_rows=trimmed_rows,
        n_rows=kept_rows.n,
        proxy=_proxy_echo(target),
    )
    logger.info(f"Partition built: {len(leaves)} dense and {len(empties)} empty slices")
    return model


def _arm_levels(dataset: Dataset, domain: Domain) -> list[tuple[object, str]]:
    """(stored value, label) for each observed level of a categorical feature."""
    if domain.kind is FeatureKind.NOMINAL:
        return [(level, level) for level in domain.levels]
    codes = np.unique(dataset.column(domain.name))
    return [(int(code), domain.label_for(float(code))) for code in codes]


def _arm_subset(domain: Domain, value: object) -> Subset:
    if domain.kind is FeatureKind.NOMINAL:
        return Subset.of_levels(domain, {value})
    return Subset.span(domain, value - 0.5, value + 0.5)


def conditioned_partition(
    dataset: Dataset, config: PartitionConfig | None, feature: str
) -> list[tuple[str, PartitionModel]]:
    """
    One partition per level of a categorical feature.

    Domains and Gower ranges come from the whole dataset; the density proxy
    and the tree are computed inside each arm. The arm restriction acts as a
    forced first split, so every slice carries the arm's level.

    Returns:
        List of (level label, arm model) in level order
    """
    config = config or PartitionConfig()
    if feature not in dataset.names:
        raise NotCategorical(f"'{feature}' is not a feature with two or more observed levels")
    kind = dataset.feature(feature).kind
    if kind not in (FeatureKind.NOMINAL, FeatureKind.ORDERED):
        raise NotCategorical(f"'{feature}' is {kind.value}, not categorical")

    domains = compute_domains(dataset)
    ranges = {k: v for k, v in numeric_ranges(dataset).items() if k != feature}
    rules = config.carve_rules()
    column = dataset.column(feature)

    models = []
    for value, label in _arm_levels(dataset, domains[feature]):
        arm = dataset.select(column == value)
        root = Slice().with_subset(_arm_subset(domains[feature], value))
        base = dict(domains=domains, config=config, conditioning=(feature, label))

        if arm.n < 2 * config.min_leaf(arm.n):
            message = f"Arm {feature}={label} has {arm.n} rows; using a single slice"
            logger.warning(message)
            warnings.warn(message, ArmTooSmall, stacklevel=2)
            y = np.zeros(0)
            if arm.n >= 2:
                y = compute_density(arm.drop_features([feature]), config.proxy, config.seed, ranges).values
            leaf = _finish_leaf(root, arm, y, domains, config.epsilon)
            models.append((label, PartitionModel(slices=number_slices([leaf], []), n_rows=arm.n, **base)))
            continue

        target = compute_density(arm.drop_features([feature]), config.proxy, config.seed, ranges)
        arm_rows, kept = trim_outliers(arm, target, config.trim_fraction)
        trimmed_rows = sorted(int(r) for r in np.setdiff1d(arm.row_ids, arm_rows.row_ids))
        y = target.values[kept]

        root, margins = carve_after_split(root, arm_rows, domains, rules)
        leaves, empties = grow_tree(root, arm_rows, y, domains, config, carved=margins)
        models.append(
            (
                label,
                PartitionModel(
                    slices=number_slices(leaves, empties),
                    trimmed_rows=trimmed_rows,
                    n_rows=arm_rows.n,
                    proxy=_proxy_echo(target),
                    **base,
                ),
            )
        )
        logger.info(f"Arm {feature}={label}: {len(leaves)} dense and {len(empties)} empty slices")
    return models
