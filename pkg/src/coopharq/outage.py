"""End-to-end outage probability of the cooperative retransmission protocol.

A K-round delivery splits on the round where the relay first decodes the
broadcast: rounds up to that point arrive at the destination on the direct
link, the remainder on the relay-destination link, and the two links fade
independently.  Total probability over the split point assembles the outage
from matched CDFs of the per-branch accumulated-information products.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special as sps

from .channel import SystemConfig
from .errors import ConfigError, NumericFailure
from .matching import MatchedCdf, build_matched_cdf, eval_cdf
from .moments import ProductRvSpec, compute_log_stats
from .special import QuadratureRule, lauricella_phi2_cdf

__all__ = [
    "DEFAULT_DEGREE",
    "OutageReport",
    "conditional_outage",
    "phase_probability",
    "outage_probability",
    "outage_bounds",
    "outage_report",
]

DEFAULT_DEGREE = 6


@dataclass(frozen=True)
class OutageReport:
    """Outage assembly for every round budget up to the configured maximum.

    per_k[K-1] is the unconditional outage after K rounds.  Row K-1 of
    per_r_conditional holds the outage conditioned on each split round
    r = 1..K.  phase_probs are the split-round probabilities at the full
    round budget.  diagnostics carries one record per distinct matched CDF.
    """

    per_k: tuple
    per_r_conditional: tuple
    phase_probs: tuple
    diagnostics: tuple

    def __post_init__(self):
        per_k = tuple(float(v) for v in self.per_k)
        rows = tuple(tuple(float(v) for v in row) for row in self.per_r_conditional)
        phases = tuple(float(v) for v in self.phase_probs)
        flat = per_k + phases + tuple(v for row in rows for v in row)
        if any(not (0.0 <= v <= 1.0) for v in flat):
            raise NumericFailure("outage report holds a value outside [0,1]")
        if len(rows) != len(per_k) or any(len(row) != k + 1 for k, row in enumerate(rows)):
            raise ConfigError("conditional matrix must be triangular with one row per round budget")
        if len(phases) != len(per_k):
            raise ConfigError("phase probabilities must cover r = 1..M")
        if abs(sum(phases) - 1.0) > 1e-8:
            raise NumericFailure(f"phase probabilities sum to {sum(phases)!r}")
        if any(b > a + 1e-8 for a, b in zip(per_k, per_k[1:])):
            raise NumericFailure("outage must not increase with the round budget")
        object.__setattr__(self, "per_k", per_k)
        object.__setattr__(self, "per_r_conditional", rows)
        object.__setattr__(self, "phase_probs", phases)
        object.__setattr__(self, "diagnostics", tuple(self.diagnostics))


def _check_kr(cfg: SystemConfig, K: int, r: int | None = None) -> None:
    if not (isinstance(K, (int, np.integer)) and not isinstance(K, bool) and 1 <= K <= cfg.max_rounds):
        raise ConfigError(f"K must be an integer in [1, {cfg.max_rounds}], got {K!r}")
    if r is not None and not (
        isinstance(r, (int, np.integer)) and not isinstance(r, bool) and 1 <= r <= K
    ):
        raise ConfigError(f"r must be an integer in [1, {K}], got {r!r}")


@lru_cache(maxsize=512)
def _matched_cached(segments: tuple, snr_scale: float, degree: int) -> MatchedCdf:
    spec = ProductRvSpec(segments=segments, snr_scale=snr_scale)
    return build_matched_cdf(compute_log_stats(spec, degree), degree)


def _matched(segments: tuple, snr_scale: float, degree: int, quad) -> MatchedCdf:
    if quad is None:
        return _matched_cached(segments, snr_scale, degree)
    spec = ProductRvSpec(segments=segments, snr_scale=snr_scale)
    return build_matched_cdf(compute_log_stats(spec, degree, quad), degree)


def _delivery_segments(cfg: SystemConfig, K: int, r: int) -> tuple:
    if r == K:
        return ((cfg.sd, tuple(range(1, K + 1))),)
    return (
        (cfg.sd, tuple(range(1, r + 1))),
        (cfg.rd, tuple(range(r + 1, K + 1))),
    )


def _single_round_cdf(link, snr_scale: float, y: float) -> float:
    # one accumulated round is exactly 1 + a Gamma(m) variate; no matching
    if y <= 1.0:
        return 0.0
    m = link.m
    return float(sps.gammainc(m, m * (y - 1.0) / (link.omega[0] * snr_scale)))


def conditional_outage(
    cfg: SystemConfig,
    K: int,
    r: int,
    degree: int | None = None,
    quad: QuadratureRule | None = None,
) -> float:
    """P(delivery fails after K rounds | relay decoded at end of round r).

    A single-round budget needs no matched expansion: the one-term product
    has the regularized lower incomplete gamma as its exact CDF, so K=1 is
    evaluated in closed form.  Multi-round products go through the matched
    CDF at the configured degree.
    """
    _check_kr(cfg, K, r)
    if K == 1:
        return _single_round_cdf(cfg.sd, cfg.snr_scale, 2.0**cfg.rate)
    n = DEFAULT_DEGREE if degree is None else degree
    mc = _matched(_delivery_segments(cfg, K, r), cfg.snr_scale, n, quad)
    return eval_cdf(mc, 2.0**cfg.rate)


def _relay_cdf(cfg: SystemConfig, j: int, degree: int, quad) -> float:
    # empty product: the relay holds nothing before round 1, so the
    # threshold (>= 2 for any positive rate) is never met
    if j == 0:
        return 1.0
    # the one-round accumulation has an exact gamma CDF, same as delivery
    if j == 1:
        return _single_round_cdf(cfg.sr, cfg.snr_scale, 2.0**cfg.rate)
    mc = _matched(((cfg.sr, tuple(range(1, j + 1))),), cfg.snr_scale, degree, quad)
    return eval_cdf(mc, 2.0**cfg.rate)


def phase_probability(
    cfg: SystemConfig,
    K: int,
    r: int,
    degree: int | None = None,
    quad: QuadratureRule | None = None,
) -> float:
    """P(relay first decodes at end of round r), in a K-round budget.

    The last slot collects every run the relay has not decoded by round
    K-1, whether or not round K succeeds.
    """
    _check_kr(cfg, K, r)
    n = DEFAULT_DEGREE if degree is None else degree
    if r == K:
        return _relay_cdf(cfg, K - 1, n, quad)
    diff = _relay_cdf(cfg, r - 1, n, quad) - _relay_cdf(cfg, r, n, quad)
    if diff < -1e-8:
        raise NumericFailure(
            f"relay CDF ordering violated at r={r}: difference {diff!r}"
        )
    return max(diff, 0.0)


def outage_probability(
    cfg: SystemConfig,
    K: int,
    degree: int | None = None,
    quad: QuadratureRule | None = None,
) -> float:
    """Unconditional outage after K rounds, total probability over the split."""
    _check_kr(cfg, K)
    total = sum(
        conditional_outage(cfg, K, r, degree, quad) * phase_probability(cfg, K, r, degree, quad)
        for r in range(1, K + 1)
    )
    return min(max(total, 0.0), 1.0)


def _sum_spectrum(cfg: SystemConfig, K: int, r: int) -> tuple:
    """Scales and correlation structure of the per-round SNR sum.

    Returns (eigenvalues of F^(1/2) E F^(1/2), E, diagonal of F) where F
    holds the per-round mean SNR over the fading order and E the per-link
    correlation blocks (zero across the direct/relay split).
    """
    if cfg.sd.m != cfg.rd.m:
        raise ConfigError(
            "the sum-SNR bound needs a common fading order on the direct and relay links"
        )
    m = cfg.sd.m
    rounds_sd = list(range(1, (K if r == K else r) + 1))
    rounds_rd = [] if r == K else list(range(r + 1, K + 1))
    scale_diag = [cfg.sd.omega[l - 1] * cfg.snr_scale / m for l in rounds_sd]
    scale_diag += [cfg.rd.omega[l - 1] * cfg.snr_scale / m for l in rounds_rd]
    lam = [cfg.sd.lam[l - 1] for l in rounds_sd] + [0.0] * len(rounds_rd)
    lam_rd = [0.0] * len(rounds_sd) + [cfg.rd.lam[l - 1] for l in rounds_rd]
    corr = np.eye(K)
    for block in (lam, lam_rd):
        v = np.asarray(block)
        corr += np.outer(v, v) - np.diag(v * v)
    froot = np.sqrt(np.asarray(scale_diag))
    delta = np.linalg.eigvalsh(froot[:, None] * corr * froot[None, :])
    return delta, corr, np.asarray(scale_diag)


def outage_bounds(cfg: SystemConfig, K: int, r: int) -> tuple:
    """Sandwich on the conditional outage from the sum of the per-round SNRs.

    The accumulated product is squeezed between functions of the plain SNR
    sum (arithmetic-geometric mean inequality), whose CDF is exact: the sum
    of the correlated Gammas has the mixture representation with scales
    given by the eigenvalues of F^(1/2) E F^(1/2), F the diagonal of
    per-round means and E the per-link correlation blocks.
    """
    _check_kr(cfg, K, r)
    m = cfg.sd.m
    delta, _, _ = _sum_spectrum(cfg, K, r)
    delta = np.clip(delta, 0.0, None)
    order_sum = K * m + 1.0
    y_hi = 2.0**cfg.rate - 1.0
    y_lo = K * (2.0 ** (cfg.rate / K) - 1.0)
    lower = lauricella_phi2_cdf(m, tuple(delta), y_lo, order_sum)
    upper = lauricella_phi2_cdf(m, tuple(delta), y_hi, order_sum)
    return (lower, upper)


def outage_report(
    cfg: SystemConfig,
    degree: int | None = None,
    quad: QuadratureRule | None = None,
) -> OutageReport:
    """Full assembly for K = 1..max_rounds, with matcher diagnostics."""
    n = DEFAULT_DEGREE if degree is None else degree
    M = cfg.max_rounds
    rows = tuple(
        tuple(conditional_outage(cfg, K, r, n, quad) for r in range(1, K + 1))
        for K in range(1, M + 1)
    )
    per_k = tuple(outage_probability(cfg, K, n, quad) for K in range(1, M + 1))
    phases = tuple(phase_probability(cfg, M, r, n, quad) for r in range(1, M + 1))
    diags = [{"label": "delivery K=1 r=1", "route": "closed-form"}]
    for K in range(2, M + 1):
        for r in range(1, K + 1):
            mc = _matched(_delivery_segments(cfg, K, r), cfg.snr_scale, n, quad)
            rec = mc.as_record()
            rec["label"] = f"delivery K={K} r={r}"
            rec["route"] = "matched"
            rec["kappa_sum"] = float(sum(mc.kappa))
            diags.append(rec)
    if M > 1:
        diags.append({"label": "relay round 1", "route": "closed-form"})
    for j in range(2, M):
        mc = _matched(((cfg.sr, tuple(range(1, j + 1))),), cfg.snr_scale, n, quad)
        rec = mc.as_record()
        rec["label"] = f"relay rounds 1..{j}"
        rec["route"] = "matched"
        rec["kappa_sum"] = float(sum(mc.kappa))
        diags.append(rec)
    return OutageReport(
        per_k=per_k,
        per_r_conditional=rows,
        phase_probs=phases,
        diagnostics=tuple(diags),
    )
