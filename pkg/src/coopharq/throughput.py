"""Long-term average throughput and constrained rate selection.

The delivered rate per channel use is the renewal-reward ratio

    T = R * (1 - P_out(M)) / (1 + sum_{l<M} P_out(l)),

and the design problem picks R maximizing T subject to P_out(M) <= theta.
P_out(M) is nondecreasing in R (every conditional term is a CDF evaluated
at 2^R), which makes the feasible region an interval and the constraint
boundary a bisection target.  The throughput curve is not proven unimodal,
so the maximizer is bracketed on a coarse grid before golden-section
refinement.

Rate evaluations are cheap: the matched-CDF cache is keyed on the product
structure and SNR only, so a rate sweep rebuilds nothing and just moves
the evaluation point 2^R.
"""
from __future__ import annotations

import dataclasses
import math

from .channel import SystemConfig
from .errors import ConfigError
from .outage import outage_probability
from .special import QuadratureRule

RATE_TOL = 1e-3
GRID_POINTS = 64
_INVGOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclasses.dataclass(frozen=True)
class RateSolution:
    """Outcome of the constrained rate search.

    When `feasible` is False the constraint already fails at the lower
    rate bound and the remaining fields describe that boundary point.
    """

    rate_opt: float
    ltat_opt: float
    outage_at_opt: float
    constraint: float
    feasible: bool

    def __post_init__(self):
        if not (math.isfinite(self.rate_opt) and self.rate_opt > 0):
            raise ConfigError(f"rate_opt must be a positive real, got {self.rate_opt!r}")
        if not 0.0 < self.constraint <= 1.0:
            raise ConfigError(f"constraint must lie in (0, 1], got {self.constraint!r}")
        if not 0.0 <= self.outage_at_opt <= 1.0:
            raise ConfigError("outage_at_opt must be a probability")
        if self.feasible and self.outage_at_opt > self.constraint * (1.0 + 1e-6):
            raise ConfigError("a feasible solution cannot violate its own constraint")
        if self.ltat_opt > self.rate_opt * (1.0 + 1e-12):
            raise ConfigError("throughput cannot exceed the initial rate")


def ltat(cfg: SystemConfig, degree: int | None = None, quad: QuadratureRule | None = None) -> float:
    """Long-term average throughput of the configured protocol."""
    M = cfg.max_rounds
    terms = [outage_probability(cfg, K, degree, quad) for K in range(1, M + 1)]
    return cfg.rate * (1.0 - terms[-1]) / (1.0 + sum(terms[:-1]))


def optimal_rate(
    cfg_template: SystemConfig,
    theta: float,
    degree: int | None = None,
    r_bounds: tuple = (0.1, 12.0),
    quad: QuadratureRule | None = None,
) -> RateSolution:
    """Throughput-maximizing initial rate under an outage ceiling.

    Evaluates everything on copies of `cfg_template` with only the rate
    replaced; its own rate field is ignored.
    """
    if not (isinstance(theta, (int, float)) and 0.0 < theta <= 1.0):
        raise ConfigError(f"theta must lie in (0, 1], got {theta!r}")
    r_lo, r_hi = (float(v) for v in r_bounds)
    if not (math.isfinite(r_lo) and math.isfinite(r_hi) and 0.0 < r_lo < r_hi):
        raise ConfigError(f"rate bounds must satisfy 0 < lo < hi, got {r_bounds!r}")
    M = cfg_template.max_rounds

    def at_rate(rate: float) -> SystemConfig:
        return dataclasses.replace(cfg_template, rate=rate)

    def pout(rate: float) -> float:
        return outage_probability(at_rate(rate), M, degree, quad)

    def tput(rate: float) -> float:
        return ltat(at_rate(rate), degree, quad)

    theta = float(theta)
    if pout(r_lo) > theta:
        return RateSolution(
            rate_opt=r_lo,
            ltat_opt=tput(r_lo),
            outage_at_opt=pout(r_lo),
            constraint=theta,
            feasible=False,
        )

    if pout(r_hi) <= theta:
        r_max = r_hi
    else:
        # walk the feasible boundary down to a 1e-3-relative certificate
        lo, hi = r_lo, r_hi
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if pout(mid) > theta:
                hi = mid
            else:
                lo = mid
            if pout(lo) >= theta * (1.0 - 1e-3) or hi - lo < 1e-12:
                break
        r_max = lo

    grid = [r_lo + (r_max - r_lo) * i / (GRID_POINTS - 1) for i in range(GRID_POINTS)]
    values = [tput(r) for r in grid]
    best = max(range(GRID_POINTS), key=values.__getitem__)
    a = grid[max(best - 1, 0)]
    b = grid[min(best + 1, GRID_POINTS - 1)]

    x1 = b - _INVGOLD * (b - a)
    x2 = a + _INVGOLD * (b - a)
    f1, f2 = tput(x1), tput(x2)
    while b - a > RATE_TOL:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + _INVGOLD * (b - a)
            f2 = tput(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - _INVGOLD * (b - a)
            f1 = tput(x1)
    candidates = [(grid[best], values[best]), (x1, f1), (x2, f2)]
    rate_opt, ltat_opt = max(candidates, key=lambda rv: rv[1])
    return RateSolution(
        rate_opt=rate_opt,
        ltat_opt=ltat_opt,
        outage_at_opt=pout(rate_opt),
        constraint=theta,
        feasible=True,
    )
