"""
Negative Space CLI

Partition a tabular dataset's feature space into dense and empty slices,
score partitions, screen treatment arms for positivity problems and draw
slices in two dimensions.
"""

import io
import logging
import sys
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

import click
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from . import __version__
from .dataset_io import load_schema, read_for_model, read_table, write_table
from .errors import NegativeSpaceError
from .feature_model import compute_domains
from .partition_models import CandidatesDocument, MetricsDocument
from .partition_store import (
    candidate_record,
    dump_document,
    load_partition,
    save_partition,
)
from .positivity_screen import ViolationCandidate, remove_slices, screen_positivity
from .settings import Settings
from .slice_geometry import describe_slice
from .slice_render import render_svg
from .tree_partitioner import PartitionModel, build_partition
from .uniformity_metrics import UniformityReport, uniformity_statistic

logger = logging.getLogger(__name__)

console = Console()
err_console = Console(stderr=True)

EXISTING_FILE = click.Path(exists=True, dir_okay=False, path_type=Path)
OUTPUT_FILE = click.Path(dir_okay=False, path_type=Path)


@contextmanager
def data_errors() -> Iterator[None]:
    """Exit 1 on data errors, 2 on invalid parameter combinations."""
    try:
        yield
    except ValidationError as err:
        raise click.UsageError(f"Invalid parameters: {err}") from err
    except (NegativeSpaceError, OSError) as err:
        err_console.print(f"[bold red]Error:[/bold red] {err}")
        sys.exit(1)


def partition_options(func):
    """Options shared by every command that grows partitions."""
    options = [
        click.option("--data", "data_path", type=EXISTING_FILE, required=True, help="Dataset CSV"),
        click.option("--schema", "schema_path", type=EXISTING_FILE, required=True, help="Schema JSON"),
        click.option("--min-l", "min_L", type=float, help="Minimum carved gap length"),
        click.option("--p-star", type=int, help="Maximum slice dimension"),
        click.option(
            "--min-support-frac", "min_slice_size_frac", type=float, help="Minimum leaf support fraction"
        ),
        click.option("--epsilon", type=float, help="Length share of observed values"),
        click.option("--proxy", "method", type=click.Choice(["gower-knn", "iforest"]), help="Density proxy"),
        click.option("--knn-m", type=int, help="Neighbour rank for gower-knn"),
        click.option("--trees", "n_trees", type=int, help="Isolation trees"),
        click.option("--subsample", type=int, help="Rows per isolation tree"),
        click.option("--trim", "trim_fraction", type=float, help="Fraction of sparsest rows dropped"),
        click.option("--seed", type=int, help="Random seed"),
        click.option(
            "--min-mse-frac", "min_mse_decrease_frac", type=float, help="Minimum MSE decrease / Var(y)"
        ),
        click.option("--gap-gating", type=click.Choice(["union", "piece"]), help="Boundary gap gating"),
    ]
    for option in reversed(options):
        func = option(func)
    return func


OVERRIDE_KEYS = (
    "min_L",
    "p_star",
    "min_slice_size_frac",
    "epsilon",
    "method",
    "knn_m",
    "n_trees",
    "subsample",
    "trim_fraction",
    "seed",
    "min_mse_decrease_frac",
    "gap_gating",
)


def _config_from(settings: Settings, options: dict):
    return settings.partition_config(**{key: options.get(key) for key in OVERRIDE_KEYS})


def slices_table(model: PartitionModel, title: str = "Slices") -> Table:
    table = Table(title=title)
    table.add_column("ID", justify="right", style="cyan")
    table.add_column("Rules")
    table.add_column("Support", justify="right")
    table.add_column("Mean y", justify="right")
    table.add_column("Volume", justify="right")
    for S in model.slices:
        table.add_row(
            str(S.id),
            describe_slice(S, model.domains),
            str(S.support),
            "-" if S.mean_density is None else f"{S.mean_density:.4g}",
            f"{S.volume:.6f}",
            style="red" if S.is_empty else None,
        )
    return table


def report_table(report: UniformityReport) -> Table:
    table = Table(title="Uniformity")
    table.add_column("Statistic")
    table.add_column("Value", justify="right")
    table.add_row("chi", f"{report.chi:.6g}")
    table.add_row("df", str(report.df))
    table.add_row("normalized", f"{report.normalized:.6g}" if report.normalized_defined else "n/a")
    table.add_row("p-value", f"{report.p_value:.6g}")
    table.add_row("rows", str(report.n_rows))
    table.add_row("outside", str(report.n_outside))
    return table


def candidates_table(candidates: list[ViolationCandidate], arms: list[str]) -> Table:
    table = Table(title="Positivity candidates")
    table.add_column("Rules")
    for arm in arms:
        table.add_column(f"arm {arm}", justify="right")
    table.add_column("Size", justify="right")
    table.add_column("Flagged", justify="center")
    for c in candidates:
        table.add_row(
            c.rules,
            *(str(c.counts.get(arm, 0)) for arm in arms),
            str(c.total),
            "yes" if c.flagged else "",
        )
    return table


def format_candidates_table(candidates: list[ViolationCandidate], arms: list[str]) -> str:
    """Aligned plain-text rendition of the candidates table."""
    buffer = io.StringIO()
    Console(file=buffer, width=160, color_system=None).print(candidates_table(candidates, arms))
    return buffer.getvalue()


@click.group()
@click.version_option(version=__version__, prog_name="negative-space")
@click.option(
    "--config",
    "config_path",
    type=EXISTING_FILE,
    default=None,
    help="Settings YAML (default: config/settings.yaml)",
)
@click.option("--verbose", "-v", is_flag=True, help="Debug logging")
@click.pass_context
def cli(ctx, config_path, verbose):
    """
    Negative Space - density-separated slices of a tabular feature space.

    Finds interpretable hyper-rectangles that are dense, sparse or empty.
    """
    settings = Settings(config_path)
    settings.configure_logging(verbose)
    ctx.obj = settings


@cli.command()
@partition_options
@click.option("--out", "out_path", type=OUTPUT_FILE, default=Path("partition.json"), show_default=True)
@click.pass_obj
def partition(settings: Settings, data_path, schema_path, out_path, **options):
    """Grow a partition and write it as JSON."""
    with data_errors():
        config = _config_from(settings, options)
        dataset = read_table(data_path, load_schema(schema_path))
        model = build_partition(dataset, config)
        save_partition(model, out_path)

    console.print(slices_table(model))
    console.print(f"[green]✓[/green] {model.n_slices} slices written to {out_path}")


@cli.command()
@click.option("--model", "model_path", type=EXISTING_FILE, required=True, help="Partition JSON")
@click.option("--data", "data_path", type=EXISTING_FILE, required=True, help="Dataset CSV")
@click.option("--schema", "schema_path", type=EXISTING_FILE, default=None, help="Schema JSON (optional)")
@click.option("--out", "out_path", type=OUTPUT_FILE, default=Path("metrics.json"), show_default=True)
@click.pass_obj
def metrics(settings: Settings, model_path, data_path, schema_path, out_path):
    """Occupancy and chi-squared uniformity of a partition on a dataset."""
    with data_errors():
        model = load_partition(model_path)
        schema = load_schema(schema_path) if schema_path else None
        dataset = read_for_model(data_path, model.domains, schema)
        report = uniformity_statistic(model, dataset)
        document = MetricsDocument(model=str(model_path), data=str(data_path), report=report)
        Path(out_path).write_text(dump_document(document), encoding="utf-8")

    console.print(report_table(report))
    console.print(f"[green]✓[/green] Metrics written to {out_path}")


@cli.command("screen-positivity")
@partition_options
@click.option("--treatment", required=True, help="Categorical treatment feature")
@click.option("--sparsity-quantile", type=float, default=None, help="Share of sparsest slices per arm")
@click.option("--imbalance-ratio", type=float, default=None, help="Max/min arm fraction that flags")
@click.option("--out", "out_path", type=OUTPUT_FILE, default=Path("candidates.json"), show_default=True)
@click.option("--table-out", type=OUTPUT_FILE, default=None, help="Also write the table as text")
@click.option("--removed-out", type=OUTPUT_FILE, default=None, help="Write rows left after removal (CSV)")
@click.pass_obj
def screen_positivity_cmd(
    settings: Settings,
    data_path,
    schema_path,
    treatment,
    sparsity_quantile,
    imbalance_ratio,
    out_path,
    table_out,
    removed_out,
    **options,
):
    """Propose slices that are sparse in one treatment arm but not another."""
    quantile = sparsity_quantile
    if quantile is None:
        quantile = settings.get("positivity.sparsity_quantile")
    ratio = imbalance_ratio
    if ratio is None:
        ratio = settings.get("positivity.imbalance_ratio")
    if not 0.0 < quantile < 1.0:
        raise click.BadParameter("must be in (0, 1)", param_hint="--sparsity-quantile")
    if ratio <= 1.0:
        raise click.BadParameter("must exceed 1", param_hint="--imbalance-ratio")

    with data_errors():
        config = _config_from(settings, options)
        dataset = read_table(data_path, load_schema(schema_path))
        candidates = screen_positivity(dataset, treatment, config, quantile, ratio)
        domains = compute_domains(dataset)
        arms = list(candidates[0].counts) if candidates else []
        document = CandidatesDocument(
            treatment=treatment,
            sparsity_quantile=quantile,
            imbalance_ratio=ratio,
            config=config.model_dump(mode="json"),
            candidates=[candidate_record(c, domains) for c in candidates],
        )
        Path(out_path).write_text(dump_document(document), encoding="utf-8")
        if table_out:
            Path(table_out).write_text(format_candidates_table(candidates, arms), encoding="utf-8")
        if removed_out:
            remaining, removal = remove_slices(dataset, candidates, treatment, domains)
            write_table(remaining, removed_out)
            report_path = Path(removed_out).with_suffix(".report.json")
            report_path.write_text(dump_document(removal), encoding="utf-8")
            console.print(
                f"Removed {removal.removed_total} rows "
                f"({', '.join(f'{k}: {v}' for k, v in removal.removed_per_arm.items())})"
            )

    console.print(candidates_table(candidates, arms))
    flagged = sum(c.flagged for c in candidates)
    console.print(f"[green]✓[/green] {len(candidates)} candidates ({flagged} flagged) written to {out_path}")


@cli.command()
@click.option("--model", "model_path", type=EXISTING_FILE, required=True, help="Partition JSON")
@click.option("--data", "data_path", type=EXISTING_FILE, required=True, help="Dataset CSV")
@click.option("--schema", "schema_path", type=EXISTING_FILE, default=None, help="Schema JSON (optional)")
@click.option("--x", "x_feature", required=True, help="Horizontal feature")
@click.option("--y", "y_feature", required=True, help="Vertical feature")
@click.option("--out", "out_path", type=OUTPUT_FILE, default=Path("partition.svg"), show_default=True)
@click.pass_obj
def render(settings: Settings, model_path, data_path, schema_path, x_feature, y_feature, out_path):
    """Draw the slices over two numeric features as SVG."""
    if x_feature == y_feature:
        raise click.UsageError("--x and --y must name two different features")

    with data_errors():
        model = load_partition(model_path)
        schema = load_schema(schema_path) if schema_path else None
        dataset = read_for_model(data_path, model.domains, schema)
        svg = render_svg(
            model,
            dataset,
            x_feature,
            y_feature,
            point_size=float(settings.get("render.point_size", 12.0)),
            hash_salt=str(settings.get("render.hash_salt", "negative-space")),
        )
        Path(out_path).write_text(svg, encoding="utf-8")

    console.print(f"[green]✓[/green] SVG written to {out_path}")


if __name__ == "__main__":
    cli()
