"""Tests for the positivity screen and slice removal."""

import numpy as np
import pandas as pd
import pytest

from modules.errors import NotCategorical
from modules.feature_model import FeatureKind, FeatureSchema, compute_domains, validate_dataset
from modules.positivity_screen import is_imbalanced, remove_slices, screen_positivity
from modules.slice_geometry import slice_contains, slice_key

SCHEMA = [
    FeatureSchema(name="X", kind=FeatureKind.REAL),
    FeatureSchema(name="Z", kind=FeatureKind.REAL),
    FeatureSchema(name="T", kind=FeatureKind.NOMINAL),
]


def _frame(x, z, t):
    return pd.DataFrame({"X": [repr(float(v)) for v in x], "Z": [repr(float(v)) for v in z], "T": list(t)})


@pytest.fixture
def planted():
    """Arm b never sees X above 4; arm a covers X in [0, 10]."""
    rng = np.random.default_rng(7)
    x = np.concatenate([rng.uniform(0.0, 10.0, 60), rng.uniform(0.0, 4.0, 60)])
    z = np.tile(rng.uniform(0.0, 10.0, 60), 2)
    t = ["a"] * 60 + ["b"] * 60
    return validate_dataset(_frame(x, z, t), SCHEMA)


@pytest.fixture
def balanced():
    """Both arms hold exactly the same covariate rows."""
    rng = np.random.default_rng(8)
    x, z = rng.uniform(0.0, 10.0, 50), rng.uniform(0.0, 10.0, 50)
    return validate_dataset(_frame(np.tile(x, 2), np.tile(z, 2), ["a"] * 50 + ["b"] * 50), SCHEMA)


class TestImbalance:
    @pytest.mark.parametrize(
        "fractions, counts, expected",
        [
            ([0.5, 0.1], [5, 1], True),
            ([0.4, 0.1], [4, 1], False),
            ([0.0, 0.2], [0, 3], True),
            ([0.0, 0.0], [0, 0], False),
        ],
    )
    def test_ratio(self, fractions, counts, expected):
        assert is_imbalanced(fractions, counts, 5.0) is expected


class TestScreen:
    def test_planted_region_is_flagged(self, planted):
        candidates = screen_positivity(planted, "T")
        x = planted.column("X")
        arm_b_max = x[60:].max()
        expected_a = int(np.sum(x[:60] > arm_b_max))

        planted_hits = [
            c for c in candidates
            if c.flagged and "X" in c.base.subsets and c.base.subsets["X"].interval.lo == arm_b_max
        ]
        assert planted_hits
        hit = planted_hits[0]
        assert hit.origin_level == "b"
        assert hit.origin_empty
        assert hit.counts == {"a": expected_a, "b": 0}
        assert hit.fractions["a"] == pytest.approx(expected_a / 60)
        assert "T" not in hit.base.subsets

    def test_candidates_are_distinct(self, planted):
        keys = [slice_key(c.base) for c in screen_positivity(planted, "T")]
        assert len(keys) == len(set(keys))

    def test_balanced_arms_flag_nothing(self, balanced):
        candidates = screen_positivity(balanced, "T")
        assert candidates
        assert not any(c.flagged for c in candidates)
        for c in candidates:
            assert c.counts["a"] == c.counts["b"]

    def test_parameter_ranges(self, planted):
        with pytest.raises(ValueError):
            screen_positivity(planted, "T", sparsity_quantile=0.0)
        with pytest.raises(ValueError):
            screen_positivity(planted, "T", imbalance_ratio=1.0)

    def test_treatment_must_be_categorical(self, planted):
        with pytest.raises(NotCategorical):
            screen_positivity(planted, "X")


class TestRemoval:
    def test_removes_exactly_the_flagged_rows(self, planted):
        candidates = screen_positivity(planted, "T")
        domains = compute_domains(planted)
        flagged = [c for c in candidates if c.flagged]

        inside = [
            any(slice_contains(c.base, planted.row(i), domains) for c in flagged) for i in range(planted.n)
        ]
        remaining, report = remove_slices(planted, candidates, "T", domains)

        assert report.removed_total == sum(inside)
        assert report.n_before == 120
        assert report.n_after == remaining.n == 120 - sum(inside)
        assert report.slices_removed == len(flagged)
        assert remaining.row_ids.tolist() == [i for i in range(120) if not inside[i]]
        t = planted.column("T")
        assert report.removed_per_arm == {
            arm: sum(1 for i in range(120) if inside[i] and t[i] == arm) for arm in ("a", "b")
        }

    def test_nothing_flagged_keeps_everything(self, balanced):
        candidates = screen_positivity(balanced, "T")
        remaining, report = remove_slices(balanced, candidates, "T")
        assert remaining.n == balanced.n
        assert report.removed_total == 0
        assert report.removed_per_arm == {"a": 0, "b": 0}
