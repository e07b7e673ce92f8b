"""CSV loading and matplotlib rendering for the figure recipes.

Rendering is a read-only pass over the data directory.  SVG output is
byte-reproducible: element ids are salted with the figure id, text is
kept as text, and the date stamp is dropped, so re-rendering unchanged
CSVs yields identical files.
"""
import csv
import dataclasses
import math
from pathlib import Path

import click
import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  backend must be pinned first

from .recipes import RECIPES, FigureRecipe  # noqa: E402


class FigureDataError(RuntimeError):
    """An input CSV is missing, empty, or shaped wrong for its recipe."""


_BOOL = {"true": 1.0, "false": 0.0}


def _read_table(path: Path):
    """Header list and string rows, skipping the provenance comment."""
    with path.open(newline="") as fh:
        first = fh.readline()
        if not first.startswith("#"):
            raise FigureDataError(
                f"{path} lacks the provenance comment line; is this a CLI output?"
            )
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FigureDataError(f"{path} has no header row") from None
        rows = [row for row in reader if row]
    return header, rows


def _column(path: Path, header, rows, name: str) -> np.ndarray:
    try:
        idx = header.index(name)
    except ValueError:
        raise FigureDataError(
            f"{path} has no column {name!r}; found {', '.join(header)}"
        ) from None
    out = np.empty(len(rows))
    for i, row in enumerate(rows):
        v = row[idx]
        out[i] = _BOOL.get(v, math.nan) if v in _BOOL else float(v)
    return out


@dataclasses.dataclass(frozen=True)
class LoadedSeries:
    label: str
    x: np.ndarray
    y: np.ndarray
    se: np.ndarray | None


def load_series(recipe: FigureRecipe, data_dir) -> tuple:
    """Resolve every series of `recipe` against `data_dir`.

    A glob matching several files fans one declared series out into one
    loaded series per file, labeled by the file's parent directory.
    """
    data_dir = Path(data_dir)
    loaded = []
    for spec in recipe.series:
        paths = sorted(data_dir.glob(spec.source))
        if not paths:
            raise FigureDataError(
                f"no file matches {spec.source!r} under {data_dir}"
            )
        for path in paths:
            header, rows = _read_table(path)
            if not rows:
                raise FigureDataError(
                    f"{path} holds no data rows; refusing to draw a blank series"
                )
            label = spec.label
            if len(paths) > 1:
                label = f"{label} ({path.parent.name})"
            loaded.append(
                LoadedSeries(
                    label=label,
                    x=_column(path, header, rows, spec.x),
                    y=_column(path, header, rows, spec.y),
                    se=None if spec.se is None else _column(path, header, rows, spec.se),
                )
            )
    return tuple(loaded)


def render(recipe: FigureRecipe, data_dir, out_path) -> Path:
    """Draw `recipe` from the CSVs under `data_dir` into a vector file."""
    out_path = Path(out_path)
    if out_path.suffix not in (".svg", ".pdf"):
        raise FigureDataError(f"vector output only (.svg or .pdf), got {out_path.name}")
    loaded = load_series(recipe, data_dir)

    rc = {
        "svg.fonttype": "none",
        "svg.hashsalt": recipe.figure_id,
        "font.size": 10.0,
    }
    # reproducibility: no date stamp in the output
    metadata = {"Date": None} if out_path.suffix == ".svg" else {"CreationDate": None}
    with plt.rc_context(rc):
        fig, ax = plt.subplots(figsize=(6.4, 4.4))
        try:
            for s in loaded:
                if s.se is None:
                    ax.plot(s.x, s.y, label=s.label)
                else:
                    ax.errorbar(
                        s.x, s.y, yerr=3.0 * s.se, label=s.label,
                        fmt="o", markersize=3.5, linestyle="none", capsize=2.5,
                    )
            ax.set_xscale(recipe.x_scale)
            ax.set_yscale(recipe.y_scale)
            ax.set_xlabel(recipe.x_label)
            ax.set_ylabel(recipe.y_label)
            ax.set_title(recipe.title)
            ax.grid(True, alpha=0.3)
            ax.legend()
            fig.savefig(out_path, metadata=metadata)
        finally:
            plt.close(fig)
    return out_path


@click.group()
@click.version_option()
def main():
    """Render figures from coopharq CSV outputs."""


@main.command(name="list")
def list_cmd():
    """Show every recipe with its inputs and producing invocations."""
    for fid in sorted(RECIPES):
        r = RECIPES[fid]
        click.echo(f"{fid}  {r.title}")
        for glob in r.inputs:
            click.echo(f"    reads   {glob}")
        for cmd in r.produced_by:
            click.echo(f"    made by {cmd}")


@main.command(name="render")
@click.argument("figure_id", type=click.Choice(sorted(RECIPES)))
@click.option("--data", "data_dir", type=click.Path(exists=True, file_okay=False),
              default=".", help="Directory holding the input CSVs.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None,
              help="Output file (.svg or .pdf); defaults to <FIGURE_ID>.svg.")
def render_cmd(figure_id, data_dir, out_path):
    """Render one figure from previously generated CSVs."""
    recipe = RECIPES[figure_id]
    out_path = Path(out_path) if out_path else Path(f"{figure_id}.svg")
    try:
        written = render(recipe, data_dir, out_path)
    except FigureDataError as exc:
        raise click.ClickException(str(exc)) from exc
    click.echo(f"wrote {written}")
