"""
Uniformity Metrics Module
Slice occupancy and the chi-squared uniformity statistic of a partition
"""

import logging
import warnings
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import gammaincc

from .errors import NegativeInput, RowOutsideSpace
from .feature_model import Dataset
from .tree_partitioner import PartitionModel

logger = logging.getLogger(__name__)


class SliceOccupancy(BaseModel):
    id: int
    phi: float = Field(..., ge=0.0, le=1.0, description="Fraction of rows in the slice")
    volume: float = Field(..., gt=0.0, description="Adjusted slice volume")


class UniformityReport(BaseModel):
    """How far the observed occupancy departs from uniform occupancy."""

    slices: list[SliceOccupancy]
    chi: float = Field(..., ge=0.0)
    df: int = Field(..., ge=0)
    normalized: float = Field(..., ge=0.0, description="chi / df, 0 when df = 0")
    normalized_defined: bool = Field(..., description="False for a single-slice partition")
    p_value: float = Field(..., ge=0.0, le=1.0)
    n_rows: int = Field(..., ge=0, description="Rows counted inside the space")
    n_outside: int = Field(default=0, ge=0, description="Rows outside every slice")


def occupancy_fractions(model: PartitionModel, dataset: Dataset | None = None) -> tuple[np.ndarray, int]:
    """
    Fraction of rows falling into each slice.

    Without a dataset the supports recorded in the model are used. Rows of a
    foreign dataset outside every slice are excluded and reported.

    Returns:
        Tuple of (fractions in slice order, rows outside the space)
    """
    if dataset is None:
        return model.occupancy(), 0

    owner = model.assign(dataset)
    outside = int(np.sum(owner < 0))
    if outside:
        message = f"{outside} of {dataset.n} rows fall outside every slice"
        logger.warning(message)
        warnings.warn(message, RowOutsideSpace, stacklevel=2)

    counts = np.bincount(owner[owner >= 0], minlength=model.n_slices).astype(float)
    inside = dataset.n - outside
    return (counts / inside if inside else counts), outside


def chisq_upper_tail(x: float, df: int) -> float:
    """Upper tail 1 - P(df/2, x/2) of the chi-squared distribution."""
    if x < 0 or df < 1:
        raise NegativeInput(f"chi-squared tail needs x >= 0 and df >= 1, got x={x}, df={df}")
    if x == 0:
        return 1.0
    return float(gammaincc(df / 2.0, x / 2.0))


def chi_statistic(phi: Sequence[float], volumes: Sequence[float]) -> float:
    """Sum over slices of (phi - V)^2 / V."""
    phi = np.asarray(phi, dtype=float)
    volumes = np.asarray(volumes, dtype=float)
    return float(np.sum((phi - volumes) ** 2 / volumes))


def uniformity_statistic(model: PartitionModel, dataset: Dataset | None = None) -> UniformityReport:
    """
    Chi-squared uniformity report of a partition.

    df is K - 1; the normalised score is chi / df and is reported as 0 (with
    normalized_defined False) when K = 1, where the p-value is 1.
    """
    phi, outside = occupancy_fractions(model, dataset)
    volumes = [s.volume for s in model.slices]
    chi = chi_statistic(phi, volumes)
    df = model.n_slices - 1
    n_rows = model.n_rows if dataset is None else dataset.n - outside

    return UniformityReport(
        slices=[
            SliceOccupancy(id=s.id, phi=float(f), volume=s.volume) for s, f in zip(model.slices, phi)
        ],
        chi=chi,
        df=df,
        normalized=chi / df if df > 0 else 0.0,
        normalized_defined=df > 0,
        p_value=chisq_upper_tail(chi, df) if df > 0 else 1.0,
        n_rows=n_rows,
        n_outside=outside,
    )
