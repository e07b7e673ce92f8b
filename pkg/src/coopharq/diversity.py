"""High-SNR slope of the outage curve and the correlation eigen-structure.

The protocol's asymptotic outage decays like the SNR to the power of
(round budget x fading order).  This module measures that exponent from
the analytical pipeline by a log-log fit over an automatically chosen
high-SNR window, and exposes the eigenvalues that govern the sum-SNR
bounds behind the same claim.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .channel import SystemConfig
from .errors import ConfigError, NumericFailure, ResourceLimit
from .outage import _sum_spectrum, outage_probability
from .special import QuadratureRule

__all__ = [
    "FIT_FLOOR",
    "FIT_CEILING",
    "CorrelationSpectrum",
    "DiversityEstimate",
    "correlation_spectrum",
    "estimate_diversity",
]

# values outside this band are either pre-asymptotic or numerically hollow
FIT_FLOOR = 1e-12
FIT_CEILING = 1e-2


@dataclass(frozen=True)
class CorrelationSpectrum:
    """Eigen-structure of the per-round SNR sum at the full round budget.

    matrix_f holds the diagonal of per-round mean SNR over the fading
    order; matrix_e the unit-diagonal correlation blocks, zero across the
    direct/relay split.  eigenvalues are those of F^(1/2) E F^(1/2),
    ascending.
    """

    eigenvalues: tuple
    matrix_e: tuple
    matrix_f: tuple

    def __post_init__(self):
        e = np.asarray(self.matrix_e)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise ConfigError("matrix_e must be square")
        if not np.allclose(e, e.T, atol=1e-12):
            raise NumericFailure("correlation matrix must be symmetric")
        if not np.allclose(np.diag(e), 1.0, atol=1e-12):
            raise NumericFailure("correlation matrix must have a unit diagonal")
        off = e - np.diag(np.diag(e))
        if np.any(off < 0.0) or np.any(off >= 1.0):
            raise NumericFailure("off-diagonal correlations must lie in [0, 1)")
        if len(self.matrix_f) != e.shape[0] or len(self.eigenvalues) != e.shape[0]:
            raise ConfigError("eigenvalues and matrix_f must match the matrix dimension")
        if any(d <= 0.0 for d in self.eigenvalues):
            raise NumericFailure(
                f"sum-SNR spectrum must be positive, got {tuple(self.eigenvalues)!r}"
            )
        object.__setattr__(self, "eigenvalues", tuple(float(d) for d in self.eigenvalues))
        object.__setattr__(self, "matrix_e", tuple(tuple(float(v) for v in row) for row in e))
        object.__setattr__(self, "matrix_f", tuple(float(v) for v in self.matrix_f))


def correlation_spectrum(cfg: SystemConfig, r: int) -> CorrelationSpectrum:
    """Spectrum of F^(1/2) E F^(1/2) for the full budget split at round r."""
    M = cfg.max_rounds
    if not (isinstance(r, (int, np.integer)) and not isinstance(r, bool) and 1 <= r <= M):
        raise ConfigError(f"r must be an integer in [1, {M}], got {r!r}")
    delta, corr, scale = _sum_spectrum(cfg, M, int(r))
    return CorrelationSpectrum(
        eigenvalues=tuple(np.sort(delta)),
        matrix_e=tuple(tuple(row) for row in corr),
        matrix_f=tuple(scale),
    )


@dataclass(frozen=True)
class DiversityEstimate:
    """Fitted log-log outage slope against the theoretical exponent.

    outage_values aligns with snr_grid_db; points that could not be
    evaluated (weight assembly breakdown deep in the tail) hold NaN.
    window_indices are the grid positions used for the fit: the
    highest-SNR contiguous run with outage inside [FIT_FLOOR, FIT_CEILING].
    fitted_slope is the signed slope of log10 P against log10 SNR, so the
    order estimate is its negation.
    """

    snr_grid_db: tuple
    outage_values: tuple
    fitted_slope: float
    theory: float
    window_indices: tuple

    def __post_init__(self):
        if len(self.snr_grid_db) != len(self.outage_values):
            raise ConfigError("grid and outage values must align")
        if not self.window_indices:
            raise ConfigError("the fit window cannot be empty")
        object.__setattr__(self, "snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        object.__setattr__(self, "outage_values", tuple(float(p) for p in self.outage_values))
        object.__setattr__(self, "fitted_slope", float(self.fitted_slope))
        object.__setattr__(self, "theory", float(self.theory))
        object.__setattr__(self, "window_indices", tuple(int(i) for i in self.window_indices))

    @property
    def order(self) -> float:
        return -self.fitted_slope

    @property
    def relative_gap(self) -> float:
        return abs(self.order - self.theory) / self.theory


def _fit_window(ps: np.ndarray) -> np.ndarray:
    usable = np.isfinite(ps) & (ps >= FIT_FLOOR) & (ps <= FIT_CEILING)
    idx = np.where(usable)[0]
    if len(idx) == 0:
        return idx
    runs = np.split(idx, np.where(np.diff(idx) > 1)[0] + 1)
    return runs[-1]


def estimate_diversity(
    cfg: SystemConfig,
    snr_grid_db,
    degree: int | None = None,
    quad: QuadratureRule | None = None,
) -> DiversityEstimate:
    """Least-squares exponent of the outage tail over an SNR grid.

    The window keeps the highest-SNR contiguous run with outage in
    [FIT_FLOOR, FIT_CEILING]: low-SNR points carry pre-asymptotic
    curvature, and values under the floor are below what the matched
    expansion resolves.  Grid points where the matcher fails outright are
    treated the same as underflowed ones.
    """
    grid = np.asarray([float(s) for s in snr_grid_db])
    if grid.ndim != 1 or len(grid) < 3:
        raise ConfigError("the SNR grid needs at least 3 points")
    if np.any(np.diff(grid) <= 0):
        raise ConfigError("the SNR grid must be strictly increasing")
    if grid[-1] - grid[0] < 20.0:
        raise ConfigError("the SNR grid must span at least 20 dB")
    ps = np.empty(len(grid))
    for i, s in enumerate(grid):
        point = dataclasses.replace(cfg, snr_db=float(s))
        try:
            ps[i] = outage_probability(point, cfg.max_rounds, degree, quad)
        except NumericFailure:
            ps[i] = math.nan
    window = _fit_window(ps)
    if len(window) < 3:
        finite = ps[np.isfinite(ps)]
        if len(finite) == 0 or np.max(finite) < FIT_FLOOR:
            raise ResourceLimit(
                "outage underflows the fit floor across the whole grid; "
                "lower the rate or the SNR range"
            )
        raise ConfigError(
            f"only {len(window)} grid points fall in the fit band "
            f"[{FIT_FLOOR:g}, {FIT_CEILING:g}]; widen or shift the grid"
        )
    slope = float(np.polyfit(grid[window] / 10.0, np.log10(ps[window]), 1)[0])
    return DiversityEstimate(
        snr_grid_db=tuple(grid),
        outage_values=tuple(ps),
        fitted_slope=slope,
        theory=cfg.max_rounds * cfg.sd.m,
        window_indices=tuple(window),
    )
