"""Shared fixtures: the 50-row wine sample and random mixed-type datasets."""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from modules.dataset_io import load_schema, read_table
from modules.feature_model import Dataset, FeatureKind, FeatureSchema, compute_domains, validate_dataset
from modules.slice_geometry import Slice, Subset

FIXTURES = Path(__file__).parent / "fixtures"

# Root split of the wine sample: float32 midpoint of 3.29 and 3.32
WINE_T = 3.3049999475479126

# Reference slice of each wine row (1-4 dense)
WINE_SLICE_OF_ROW = [
    2, 2, 3, 4, 1, 4, 3, 3, 2, 2, 4, 3, 3, 4, 4, 3, 3, 4, 4, 1,
    1, 1, 2, 2, 1, 1, 3, 3, 2, 2, 3, 3, 2, 3, 3, 2, 1, 3, 2, 1,
    1, 2, 4, 1, 2, 3, 2, 4, 2, 4,
]

MIXED_SCHEMA = [
    FeatureSchema(name="X", kind=FeatureKind.REAL),
    FeatureSchema(name="COUNT", kind=FeatureKind.INTEGER),
    FeatureSchema(name="COLOUR", kind=FeatureKind.NOMINAL),
    FeatureSchema(
        name="GRADE", kind=FeatureKind.ORDERED, ordered_levels=["none", "low", "mid", "high", "top"]
    ),
]


@pytest.fixture(autouse=True)
def _quiet_matplotlib():
    logging.getLogger("matplotlib").setLevel(logging.WARNING)


@pytest.fixture
def wine_csv() -> Path:
    return FIXTURES / "wine.csv"


@pytest.fixture
def wine_schema_path() -> Path:
    return FIXTURES / "wine_schema.json"


@pytest.fixture
def wine(wine_csv, wine_schema_path) -> Dataset:
    return read_table(wine_csv, load_schema(wine_schema_path))


@pytest.fixture
def wine_domains(wine):
    return compute_domains(wine)


@pytest.fixture
def wine_slices(wine_domains) -> list[Slice]:
    """The seven reference wine slices, dense ones first."""
    F, P = wine_domains["FLAVANOIDS"], wine_domains["PROLINE"]

    def make(f_subset: Subset, p_lo: float, p_hi: float, empty: bool = False) -> Slice:
        S = Slice().with_subset(f_subset).with_subset(Subset.span(P, p_lo, p_hi))
        return Slice(subsets=S.subsets, is_empty=empty)

    left = Subset.span(F, 2.19, WINE_T)
    right = Subset.span(F, WINE_T, 3.93, lo_open=True)
    return [
        make(Subset.span(F, 2.41, WINE_T), 679.5, 882.5),
        make(left, 882.5, 1072.5),
        make(left, 1072.5, 1515.5),
        make(right, 984.5, 1680.5),
        make(Subset.span(F, 2.19, 2.41, hi_open=True), 679.5, 882.5, empty=True),
        make(left, 1515.5, 1680.5, empty=True),
        make(right, 679.5, 984.5, empty=True),
    ]


@pytest.fixture
def wine_step_target() -> np.ndarray:
    """Density target constant on each reference dense slice."""
    level = {1: 1.0, 2: 0.0, 3: 0.5, 4: 3.0}
    return np.array([level[k] for k in WINE_SLICE_OF_ROW])


def _mixed_frame(seed: int, n: int) -> pd.DataFrame:
    rng = np.random.default_rng(seed)
    centres = rng.uniform(0.0, 10.0, size=(3, 2))
    cluster = rng.integers(0, 3, size=n)
    x = centres[cluster, 0] + rng.normal(0.0, 0.8, n)
    count = np.clip(np.round(2.0 * centres[cluster, 1] + rng.normal(0.0, 1.5, n)), 0, 30).astype(int)
    colour = np.where(cluster == 0, "red", rng.choice(["green", "blue", "red"], n))
    grade = rng.choice(["low", "mid", "high"], n, p=[0.2, 0.5, 0.3])
    return pd.DataFrame(
        {
            "X": [repr(float(v)) for v in x],
            "COUNT": [str(v) for v in count],
            "COLOUR": colour,
            "GRADE": grade,
        }
    )


@pytest.fixture
def mixed_dataset():
    """Factory for clustered mixed-type datasets: mixed_dataset(seed, n)."""

    def make(seed: int = 0, n: int = 120) -> Dataset:
        return validate_dataset(_mixed_frame(seed, n), MIXED_SCHEMA)

    return make


ORDERED_LEVELS = ["o0", "o1", "o2", "o3", "o4", "o5"]


def _random_column(rng: np.random.Generator, kind: FeatureKind, n: int, cluster: np.ndarray) -> list[str]:
    if kind is FeatureKind.REAL:
        centres = rng.uniform(-5.0, 5.0, 3)
        values = np.round(centres[cluster] + rng.normal(0.0, 1.0, n), int(rng.integers(1, 4)))
        values[:2] = [-20.0, 20.0]
        return [repr(float(v)) for v in values]
    if kind is FeatureKind.INTEGER:
        values = rng.integers(0, int(rng.integers(3, 40)), n)
        values[:2] = [0, 1]
        return [str(v) for v in values]
    if kind is FeatureKind.NOMINAL:
        levels = [f"l{k}" for k in range(int(rng.integers(2, 6)))]
        values = [levels[(c + int(s)) % len(levels)] for c, s in zip(cluster, rng.integers(0, 2, n))]
        values[:2] = ["l0", "l1"]
        return values
    values = [ORDERED_LEVELS[k] for k in rng.integers(1, len(ORDERED_LEVELS), n)]
    values[:2] = ["o1", "o2"]
    return values


@pytest.fixture
def random_dataset():
    """Factory for datasets with a random schema: 1-5 features of any kinds, n in [n_min, n_max]."""
    kinds = list(FeatureKind)

    def make(seed: int, n_min: int = 30, n_max: int = 300) -> Dataset:
        rng = np.random.default_rng(seed)
        n = int(rng.integers(n_min, n_max + 1))
        cluster = rng.integers(0, 3, n)
        schema = []
        for j in range(int(rng.integers(1, 6))):
            kind = kinds[int(rng.integers(len(kinds)))]
            levels = ORDERED_LEVELS if kind is FeatureKind.ORDERED else None
            schema.append(FeatureSchema(name=f"F{j}", kind=kind, ordered_levels=levels))
        raw = pd.DataFrame({f.name: _random_column(rng, f.kind, n, cluster) for f in schema})
        return validate_dataset(raw, schema)

    return make
