"""
Slice Render Module
Draws a partition projected onto two numeric features as an SVG scatter plot
"""

import io
import logging
from dataclasses import dataclass

import matplotlib
from matplotlib.figure import Figure
from matplotlib.patches import Rectangle

from .errors import ModelDataMismatch, NonRenderableFeature
from .feature_model import Dataset, FeatureKind
from .tree_partitioner import PartitionModel

logger = logging.getLogger(__name__)

EMPTY_COLOR = "#c0392b"
DENSE_COLOR = "#1e8449"
POINT_COLOR = "#1b2631"


@dataclass(frozen=True)
class SliceRectangle:
    """2-D extent of a slice with its fill opacity."""

    id: int
    x0: float
    x1: float
    y0: float
    y1: float
    is_empty: bool
    alpha: float

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)


def _rank_alphas(keys: list[float], low: float = 0.2, high: float = 0.8) -> list[float]:
    """Opacity rising with the rank of each key."""
    if not keys:
        return []
    order = sorted(range(len(keys)), key=lambda i: (keys[i], i))
    alphas = [0.0] * len(keys)
    for rank, i in enumerate(order):
        alphas[i] = high if len(keys) == 1 else low + (high - low) * rank / (len(keys) - 1)
    return alphas


def slice_rectangles(model: PartitionModel, x_feature: str, y_feature: str) -> list[SliceRectangle]:
    """
    Rectangles of every slice over two features.

    Empty slices darken with volume rank, dense slices with density rank
    (lower mean y is denser).
    """
    for name in (x_feature, y_feature):
        if name not in model.domains:
            raise ModelDataMismatch(f"'{name}' is not a feature of the partition")
        if model.domains[name].kind is FeatureKind.NOMINAL:
            raise NonRenderableFeature(f"'{name}' is nominal and cannot be an axis")

    dx, dy = model.domains[x_feature], model.domains[y_feature]
    empties = [s for s in model.slices if s.is_empty]
    dense = [s for s in model.slices if not s.is_empty]
    alpha = dict(zip((s.id for s in empties), _rank_alphas([s.volume for s in empties])))
    alpha.update(
        zip(
            (s.id for s in dense),
            _rank_alphas([-(s.mean_density or 0.0) for s in dense]),
        )
    )

    rectangles = []
    for S in model.slices:
        ix, iy = S.subset(dx).interval, S.subset(dy).interval
        rectangles.append(SliceRectangle(S.id, ix.lo, ix.hi, iy.lo, iy.hi, S.is_empty, alpha[S.id]))
    return rectangles


def render_svg(
    model: PartitionModel,
    dataset: Dataset,
    x_feature: str,
    y_feature: str,
    point_size: float = 12.0,
    hash_salt: str = "negative-space",
) -> str:
    """SVG text of the slices over two features with the rows overlaid."""
    rectangles = slice_rectangles(model, x_feature, y_feature)
    for name in (x_feature, y_feature):
        if name not in dataset.names:
            raise ModelDataMismatch(f"Dataset has no column '{name}'")

    dx, dy = model.domains[x_feature], model.domains[y_feature]
    fig = Figure(figsize=(7, 5.5))
    ax = fig.add_subplot()
    for r in rectangles:
        ax.add_patch(
            Rectangle(
                (r.x0, r.y0),
                r.x1 - r.x0,
                r.y1 - r.y0,
                facecolor=EMPTY_COLOR if r.is_empty else DENSE_COLOR,
                alpha=r.alpha,
                edgecolor="black",
                linewidth=0.6,
            )
        )
        ax.annotate(str(r.id), ((r.x0 + r.x1) / 2, (r.y0 + r.y1) / 2), ha="center", va="center", fontsize=8)

    ax.scatter(dataset.column(x_feature), dataset.column(y_feature), s=point_size, c=POINT_COLOR, zorder=3)
    ax.set_xlim(dx.lo, dx.hi)
    ax.set_ylim(dy.lo, dy.hi)
    ax.set_xlabel(f"{x_feature} [{dx.lo:g}, {dx.hi:g}]")
    ax.set_ylabel(f"{y_feature} [{dy.lo:g}, {dy.hi:g}]")
    ax.set_title(f"{model.n_slices} slices ({sum(r.is_empty for r in rectangles)} empty)")

    buffer = io.StringIO()
    with matplotlib.rc_context({"svg.hashsalt": hash_salt}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    logger.debug(f"Rendered {len(rectangles)} rectangles over {x_feature} x {y_feature}")
    return buffer.getvalue()
