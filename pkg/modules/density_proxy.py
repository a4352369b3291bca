"""
Density Proxy Module
Per-row sparsity targets from Gower k-NN core distances or an isolation forest
"""

import logging
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.special import digamma

from .errors import MTooLarge, SubsampleTooSmall, ZeroRange
from .feature_model import Dataset, FeatureSchema

logger = logging.getLogger(__name__)


class ProxyMethod(str, Enum):
    GOWER_KNN = "gower-knn"
    ISOLATION_FOREST = "iforest"


class ProxySettings(BaseModel):
    """How the density target is computed."""

    model_config = ConfigDict(frozen=True)

    method: ProxyMethod = Field(default=ProxyMethod.GOWER_KNN, description="gower-knn | iforest")
    knn_m: int | None = Field(
        default=None, ge=1, description="Neighbour rank; None means max(5, ceil(0.02 n))"
    )
    n_trees: int = Field(default=100, ge=1, description="Isolation trees")
    subsample: int = Field(default=256, ge=2, description="Rows per isolation tree (capped at n)")
    block_rows: int = Field(default=512, ge=1, description="Rows per distance block")


@dataclass(frozen=True)
class DensityTarget:
    """Per-row proxy y; higher means sparser."""

    values: np.ndarray
    method: ProxyMethod
    params: dict[str, int] = field(default_factory=dict)


def numeric_ranges(dataset: Dataset) -> dict[str, float]:
    """Observed max - min of every numeric feature."""
    ranges = {}
    for f in dataset.schema:
        if f.kind.is_numeric:
            column = dataset.column(f.name).astype(float)
            ranges[f.name] = float(column.max() - column.min()) if column.size else 0.0
    return ranges


def _check_ranges(schema: Sequence[FeatureSchema], ranges: Mapping[str, float]) -> None:
    for f in schema:
        if f.kind.is_numeric and not ranges.get(f.name, 0.0) > 0.0:
            raise ZeroRange(f"Feature '{f.name}' has zero range")


def gower_distance(
    row_a: Mapping[str, object],
    row_b: Mapping[str, object],
    schema: Sequence[FeatureSchema],
    ranges: Mapping[str, float],
) -> float:
    """
    Gower distance between two records.

    Numeric kinds contribute |a - b| / range, nominal features 0 or 1; the
    result is the mean over features.
    """
    _check_ranges(schema, ranges)
    total = 0.0
    for f in schema:
        a, b = row_a[f.name], row_b[f.name]
        if f.kind.is_numeric:
            total += abs(float(a) - float(b)) / ranges[f.name]
        else:
            total += 0.0 if a == b else 1.0
    return total / len(schema)


class _GowerEncoding:
    """Columns prepared for blockwise Gower distances."""

    def __init__(self, dataset: Dataset, ranges: Mapping[str, float]):
        _check_ranges(dataset.schema, ranges)
        self.p = dataset.p
        self.columns: list[tuple[bool, np.ndarray, float]] = []
        for f in dataset.schema:
            if f.kind.is_numeric:
                self.columns.append((True, dataset.column(f.name).astype(float), ranges[f.name]))
            else:
                _, codes = np.unique(dataset.column(f.name).astype(str), return_inverse=True)
                self.columns.append((False, codes, 1.0))

    def block(self, start: int, stop: int) -> np.ndarray:
        """Distances from rows [start, stop) to every row."""
        out = None
        for numeric, values, scale in self.columns:
            head = values[start:stop, None]
            if numeric:
                term = np.abs(head - values[None, :]) / scale
            else:
                term = (head != values[None, :]).astype(float)
            out = term if out is None else out + term
        return out / self.p


def gower_matrix(dataset: Dataset, ranges: Mapping[str, float] | None = None) -> np.ndarray:
    """Full n x n Gower distance matrix."""
    encoding = _GowerEncoding(dataset, ranges or numeric_ranges(dataset))
    return encoding.block(0, dataset.n)


def default_knn_m(n: int) -> int:
    return min(max(5, math.ceil(0.02 * n)), n - 1)


def core_distances(
    dataset: Dataset,
    m: int,
    ranges: Mapping[str, float] | None = None,
    block_rows: int = 512,
) -> DensityTarget:
    """
    Distance from each row to its m-th nearest other row.

    Args:
        dataset: Rows to score
        m: Neighbour rank, 1 <= m < n
        ranges: Numeric ranges used for normalisation (default: observed)
        block_rows: Rows per distance block

    Returns:
        DensityTarget of core distances
    """
    n = dataset.n
    if not 1 <= m < n:
        raise MTooLarge(f"m={m} must satisfy 1 <= m < n={n}")

    encoding = _GowerEncoding(dataset, ranges or numeric_ranges(dataset))
    values = np.empty(n, dtype=float)
    for start in range(0, n, block_rows):
        stop = min(start + block_rows, n)
        distances = encoding.block(start, stop)
        distances[np.arange(stop - start), np.arange(start, stop)] = np.inf
        values[start:stop] = np.partition(distances, m - 1, axis=1)[:, m - 1]

    logger.debug(f"Core distances computed for n={n}, m={m}")
    return DensityTarget(values, ProxyMethod.GOWER_KNN, {"m": m})


def average_path_length(n: int | np.ndarray) -> np.ndarray:
    """c(n) = 2 H(n-1) - 2 (n-1) / n, zero for n <= 1."""
    n = np.asarray(n, dtype=float)
    safe = np.maximum(n, 2.0)
    harmonic = digamma(safe) + np.euler_gamma
    return np.where(n > 1, 2.0 * harmonic - 2.0 * (safe - 1.0) / safe, 0.0)


class _IsolationTree:
    def __init__(self, columns: list[tuple[bool, np.ndarray]], rng: np.random.Generator, max_depth: int):
        self.columns = columns
        self.rng = rng
        self.max_depth = max_depth

    def grow(self, idx: np.ndarray, depth: int = 0) -> tuple:
        if idx.size <= 1 or depth >= self.max_depth:
            return ("leaf", idx.size)

        candidates = [
            j for j, (_, values) in enumerate(self.columns) if np.unique(values[idx]).size > 1
        ]
        if not candidates:
            return ("leaf", idx.size)

        j = candidates[int(self.rng.integers(len(candidates)))]
        numeric, values = self.columns[j]
        node_values = values[idx]
        if numeric:
            split = float(self.rng.uniform(node_values.min(), node_values.max()))
            left = node_values < split
        else:
            levels = np.unique(node_values)
            split = levels[int(self.rng.integers(levels.size))]
            left = node_values == split
        return (
            j,
            numeric,
            split,
            self.grow(idx[left], depth + 1),
            self.grow(idx[~left], depth + 1),
        )

    def path_lengths(self, node: tuple, idx: np.ndarray, depth: int, out: np.ndarray) -> None:
        if node[0] == "leaf":
            out[idx] = depth + average_path_length(node[1])
            return
        j, numeric, split, left_node, right_node = node
        values = self.columns[j][1][idx]
        left = values < split if numeric else values == split
        if left.any():
            self.path_lengths(left_node, idx[left], depth + 1, out)
        if (~left).any():
            self.path_lengths(right_node, idx[~left], depth + 1, out)


def isolation_forest_scores(dataset: Dataset, n_trees: int, subsample: int, seed: int) -> DensityTarget:
    """
    Isolation-forest anomaly scores in [0, 1].

    Each tree grows on `subsample` rows drawn without replacement; nodes split
    a uniformly chosen non-constant feature, numeric kinds at a uniform point
    of the node's range, nominal features as one level against the rest.
    """
    n = dataset.n
    if not 2 <= subsample <= n:
        raise SubsampleTooSmall(f"subsample={subsample} must satisfy 2 <= subsample <= n={n}")
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")

    columns: list[tuple[bool, np.ndarray]] = []
    for f in dataset.schema:
        if f.kind.is_numeric:
            columns.append((True, dataset.column(f.name).astype(float)))
        else:
            _, codes = np.unique(dataset.column(f.name).astype(str), return_inverse=True)
            columns.append((False, codes))

    rng = np.random.default_rng(seed)
    max_depth = math.ceil(math.log2(subsample))
    everyone = np.arange(n)
    total = np.zeros(n, dtype=float)
    for _ in range(n_trees):
        tree = _IsolationTree(columns, rng, max_depth)
        sample = np.sort(rng.choice(n, size=subsample, replace=False))
        root = tree.grow(sample)
        lengths = np.zeros(n, dtype=float)
        tree.path_lengths(root, everyone, 0, lengths)
        total += lengths

    scores = np.power(2.0, -(total / n_trees) / float(average_path_length(subsample)))
    logger.debug(f"Isolation forest scored n={n} rows with {n_trees} trees, subsample={subsample}")
    return DensityTarget(
        scores, ProxyMethod.ISOLATION_FOREST, {"n_trees": n_trees, "subsample": subsample, "seed": seed}
    )


def compute_density(
    dataset: Dataset,
    settings: ProxySettings,
    seed: int,
    ranges: Mapping[str, float] | None = None,
) -> DensityTarget:
    """Density target for a dataset using the configured proxy."""
    if settings.method is ProxyMethod.ISOLATION_FOREST:
        return isolation_forest_scores(dataset, settings.n_trees, min(settings.subsample, dataset.n), seed)
    m = settings.knn_m if settings.knn_m is not None else default_knn_m(dataset.n)
    return core_distances(dataset, min(m, dataset.n - 1), ranges, settings.block_rows)


def trim_outliers(
    dataset: Dataset, target: DensityTarget, fraction: float
) -> tuple[Dataset, np.ndarray]:
    """
    Drop the floor(fraction * n) sparsest rows.

    Among equal scores the higher row position goes first.

    Returns:
        Tuple of (filtered dataset, positions of the kept rows)
    """
    if not 0.0 <= fraction < 1.0:
        raise ValueError(f"trim fraction must be in [0, 1), got {fraction}")

    n = dataset.n
    k = math.floor(fraction * n + 1e-9)
    if k == 0:
        return dataset, np.arange(n)

    positions = np.arange(n)
    order = np.lexsort((-positions, -target.values))
    kept = np.sort(order[k:])
    logger.info(f"Trimmed {k} outlying rows of {n}")
    return dataset.take(kept), kept

