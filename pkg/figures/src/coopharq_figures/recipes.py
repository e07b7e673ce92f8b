"""Figure recipes: which CSVs to read, how they were made, what to draw.

A recipe is static metadata.  Each one records the exact CLI invocations
that produce its inputs (run from the data directory, configs from the
committed fixtures), so a stale fixture can always be regenerated and a
reader can see the provenance of every plotted point without leaving
this file.
"""
import dataclasses
from pathlib import PurePosixPath


@dataclasses.dataclass(frozen=True)
class SeriesSpec:
    """One plotted series: a line, or error-bar points when `se` names
    a standard-error column."""

    label: str
    source: str  # glob relative to the data directory
    x: str
    y: str
    se: str | None = None

    def __post_init__(self):
        if not self.label or not self.source:
            raise ValueError("series label and source must be non-empty")


@dataclasses.dataclass(frozen=True)
class FigureRecipe:
    figure_id: str
    title: str
    produced_by: tuple  # CLI invocations creating every input, verbatim
    x_label: str
    y_label: str
    series: tuple
    x_scale: str = "linear"
    y_scale: str = "linear"

    def __post_init__(self):
        for scale in (self.x_scale, self.y_scale):
            if scale not in ("linear", "log"):
                raise ValueError(f"scale must be linear or log, got {scale!r}")
        if not self.series:
            raise ValueError("a recipe must declare at least one series")
        if not self.produced_by:
            raise ValueError("a recipe must document its producing invocations")
        # every input must trace back to a documented invocation, keyed
        # by the --out directory the CLI wrote it into
        outs = " ".join(self.produced_by)
        for s in self.series:
            top = PurePosixPath(s.source).parts[0]
            if top not in outs:
                raise ValueError(
                    f"input {s.source!r} is not produced by any documented "
                    f"invocation of {self.figure_id}"
                )

    @property
    def inputs(self):
        """Distinct source globs, in declaration order."""
        seen = []
        for s in self.series:
            if s.source not in seen:
                seen.append(s.source)
        return tuple(seen)


RECIPES = {
    "F2": FigureRecipe(
        figure_id="F2",
        title="Expansion degree needed for a target truncation bound",
        produced_by=(
            "coopharq degree --config ref.toml --epsilon 1e-4 --out F2",
        ),
        x_label="truncation tolerance",
        y_label="selected degree",
        x_scale="log",
        series=(
            SeriesSpec("selected degree", "F2/degree.csv", "epsilon", "degree"),
        ),
    ),
    "F3": FigureRecipe(
        figure_id="F3",
        title="Matched CDF convergence toward simulation",
        produced_by=(
            "coopharq validate --config ref.toml --trials 1e6 --seed 7 --out F3",
        ),
        x_label="accumulated SNR product",
        y_label="CDF",
        x_scale="log",
        series=(
            SeriesSpec("degree 0", "F3/validate_cdf.csv", "y", "matched_0"),
            SeriesSpec("degree 2", "F3/validate_cdf.csv", "y", "matched_2"),
            SeriesSpec("degree 4", "F3/validate_cdf.csv", "y", "matched_4"),
            SeriesSpec("degree 6", "F3/validate_cdf.csv", "y", "matched_6"),
            SeriesSpec("simulation", "F3/validate_cdf.csv", "y", "empirical", se="se"),
        ),
    ),
    "F4": FigureRecipe(
        figure_id="F4",
        title="Outage per round budget versus SNR",
        produced_by=(
            "coopharq outage --config ref.toml --sweep snr_db=0:2:20 --out F4",
        ),
        x_label="transmit SNR (dB)",
        y_label="outage probability",
        y_scale="log",
        series=(
            SeriesSpec("1 round", "F4/outage.csv", "snr_db", "pout_1"),
            SeriesSpec("2 rounds", "F4/outage.csv", "snr_db", "pout_2"),
            SeriesSpec("3 rounds", "F4/outage.csv", "snr_db", "pout_3"),
        ),
    ),
    "F5": FigureRecipe(
        figure_id="F5",
        title="Outage versus round correlation",
        produced_by=(
            "coopharq outage --config ref.toml --sweep rho=0:0.0101:0.9999 --out F5",
        ),
        x_label="round correlation",
        y_label="outage probability",
        y_scale="log",
        series=(
            SeriesSpec("2 rounds", "F5/outage.csv", "rho", "pout_2"),
            SeriesSpec("3 rounds", "F5/outage.csv", "rho", "pout_3"),
        ),
    ),
    "F6": FigureRecipe(
        figure_id="F6",
        title="Correlation shifts the outage curve without tilting it",
        produced_by=(
            "coopharq outage --config ref_rho01.toml --sweep snr_db=0:2:20 --out F6/rho01",
            "coopharq outage --config ref_rho06.toml --sweep snr_db=0:2:20 --out F6/rho06",
        ),
        x_label="transmit SNR (dB)",
        y_label="outage probability",
        y_scale="log",
        series=(
            SeriesSpec("correlation 0.1", "F6/rho01/outage.csv", "snr_db", "pout_3"),
            SeriesSpec("correlation 0.6", "F6/rho06/outage.csv", "snr_db", "pout_3"),
        ),
    ),
    "F7": FigureRecipe(
        figure_id="F7",
        title="Fading order steepens the outage curve",
        produced_by=(
            "coopharq outage --config ref_m1m4.toml --sweep snr_db=0:2:24 --out F7/m1",
            "coopharq outage --config ref_m3m4.toml --sweep snr_db=0:2:24 --out F7/m3",
        ),
        x_label="transmit SNR (dB)",
        y_label="outage probability",
        y_scale="log",
        series=(
            SeriesSpec("fading order 1", "F7/m1/outage.csv", "snr_db", "pout_4"),
            SeriesSpec("fading order 3", "F7/m3/outage.csv", "snr_db", "pout_4"),
        ),
    ),
    "F8": FigureRecipe(
        figure_id="F8",
        title="Optimal throughput versus the outage ceiling",
        produced_by=(
            "coopharq rate-opt --config ref_m4.toml --sweep theta=0.02:0.04:0.5 --out F8",
        ),
        x_label="outage ceiling",
        y_label="long-term average throughput",
        series=(
            SeriesSpec("optimal throughput", "F8/rate_opt.csv", "theta", "ltat_opt"),
        ),
    ),
}
