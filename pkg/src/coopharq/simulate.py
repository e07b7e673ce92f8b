"""Exact protocol-level simulation.

The sampler realizes the correlated-Gamma model through its mixture form:
a shared Gamma(m, 1) variate t drives one Poisson count per round, and the
round SNR is a Gamma(m + count) variate rescaled to the link mean.  Writing
the conditional round density as a Poisson-weighted Gamma mixture turns the
Bessel-kernel joint law into three textbook draws, exact for any real
m >= 0.5 (a Gaussian-branch construction would need 2m integer):

    sum_k e^(-qt) (qt)^k / k! * Gamma(m + k) density  =  Bessel kernel,

with q = lam^2 / (1 - lam^2), so marginals stay Gamma(m, omega/m) for every
correlation level.

Trials are processed in fixed 2^16-trial chunks.  Chunk i uses the
counter-based stream Philox(key=[seed, i]) no matter which worker runs it,
so estimates depend only on (seed, trials), never on the worker count.
Within a chunk the draw order is part of the determinism contract:
source-destination block, then source-relay, then relay-destination.
"""
from __future__ import annotations

import dataclasses
import json
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .channel import LinkModel, SystemConfig
from .errors import ConfigError
from .moments import ProductRvSpec

CHUNK_TRIALS = 1 << 16
_MASK64 = (1 << 64) - 1


def _stream(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed & _MASK64, chunk]))


def _draw_block(m, omega, lam, snr_scale, n, rng):
    """n joint draws of the selected rounds, shape (n, len(omega))."""
    omega = np.asarray(omega, dtype=float)
    lam = np.asarray(lam, dtype=float)
    t = rng.gamma(m, 1.0, size=n)
    q = lam * lam / (1.0 - lam * lam)
    counts = rng.poisson(t[:, None] * q[None, :])
    z = rng.gamma(m + counts)
    return omega[None, :] * snr_scale * (1.0 - lam * lam)[None, :] * z / m


def sample_correlated_gammas(
    link: LinkModel, snr_scale: float, K: int, rng_stream: np.random.Generator
) -> np.ndarray:
    """One exact joint draw of the first K round SNRs of a link."""
    if not 1 <= K <= link.rounds:
        raise ConfigError(f"K must be in [1, {link.rounds}], got {K}")
    return _draw_block(link.m, link.omega[:K], link.lam[:K], snr_scale, 1, rng_stream)[0]


@dataclasses.dataclass(frozen=True)
class SimResult:
    """Raw counters from a protocol run plus derived estimates.

    `outage_counts[K-1]` counts trials whose accumulated information after
    round K falls short of the rate; `phase_counts[r-1]` counts trials in
    relay-decoding bucket r (bucket M also holds the never-decoded trials,
    mirroring the analytical split).  The three rounds_* sums feed the
    ratio-estimator standard error of the throughput.
    """

    trials: int
    seed: int
    rate: float
    outage_counts: tuple
    phase_counts: tuple
    rounds_sum: int
    rounds_sq_sum: int
    success_rounds_sum: int

    def __post_init__(self):
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        counts = tuple(int(c) for c in self.outage_counts)
        phases = tuple(int(c) for c in self.phase_counts)
        if len(counts) != len(phases) or not counts:
            raise ConfigError("outage and phase counters must cover the same rounds")
        if any(c < 0 or c > self.trials for c in counts + phases):
            raise ConfigError("counters must lie in [0, trials]")
        if sum(phases) != self.trials:
            raise ConfigError("phase buckets must partition the trials")
        object.__setattr__(self, "outage_counts", counts)
        object.__setattr__(self, "phase_counts", phases)

    @property
    def max_rounds(self) -> int:
        return len(self.outage_counts)

    @property
    def outage_estimates(self) -> np.ndarray:
        return np.asarray(self.outage_counts, dtype=float) / self.trials

    @property
    def outage_standard_errors(self) -> np.ndarray:
        p = self.outage_estimates
        return np.sqrt(p * (1.0 - p) / self.trials)

    @property
    def phase_estimates(self) -> np.ndarray:
        return np.asarray(self.phase_counts, dtype=float) / self.trials

    @property
    def phase_standard_errors(self) -> np.ndarray:
        p = self.phase_estimates
        return np.sqrt(p * (1.0 - p) / self.trials)

    @property
    def ltat_estimate(self) -> float:
        delivered = self.trials - self.outage_counts[-1]
        return self.rate * delivered / self.rounds_sum

    @property
    def ltat_standard_error(self) -> float:
        # ratio estimator: per-trial pair (delivered 0/1, rounds used)
        n = self.trials
        a_bar = (n - self.outage_counts[-1]) / n
        b_bar = self.rounds_sum / n
        var_a = a_bar * (1.0 - a_bar)
        var_b = self.rounds_sq_sum / n - b_bar * b_bar
        cov = self.success_rounds_sum / n - a_bar * b_bar
        g = a_bar / b_bar
        var = (var_a - 2.0 * g * cov + g * g * var_b) / (n * b_bar * b_bar)
        return self.rate * math.sqrt(max(var, 0.0))

    def to_json(self) -> str:
        body = {
            "trials": self.trials,
            "seed": self.seed,
            "rate": self.rate,
            "outage_counts": list(self.outage_counts),
            "outage_estimates": self.outage_estimates.tolist(),
            "outage_standard_errors": self.outage_standard_errors.tolist(),
            "phase_counts": list(self.phase_counts),
            "phase_estimates": self.phase_estimates.tolist(),
            "phase_standard_errors": self.phase_standard_errors.tolist(),
            "ltat_estimate": self.ltat_estimate,
            "ltat_standard_error": self.ltat_standard_error,
        }
        return json.dumps(body, sort_keys=True, indent=2)


def _protocol_chunk(cfg: SystemConfig, seed: int, chunk: int, n: int):
    rng = _stream(seed, chunk)
    M = cfg.max_rounds
    scale = cfg.snr_scale
    gsd = _draw_block(cfg.sd.m, cfg.sd.omega[:M], cfg.sd.lam[:M], scale, n, rng)
    gsr = _draw_block(cfg.sr.m, cfg.sr.omega[:M], cfg.sr.lam[:M], scale, n, rng)
    grd = _draw_block(cfg.rd.m, cfg.rd.omega[:M], cfg.rd.lam[:M], scale, n, rng)

    decoded = np.cumsum(np.log2(1.0 + gsr), axis=1) >= cfg.rate
    # 1-based round at which the relay decodes; M+1 when it never does
    bc = np.where(decoded.any(axis=1), decoded.argmax(axis=1) + 1, M + 1)

    zero = np.zeros((n, 1))
    csd = np.concatenate([zero, np.cumsum(np.log2(1.0 + gsd), axis=1)], axis=1)
    crd = np.concatenate([zero, np.cumsum(np.log2(1.0 + grd), axis=1)], axis=1)

    rows = np.arange(n)[:, None]
    deadlines = np.arange(1, M + 1)[None, :]
    switch = np.minimum(bc[:, None], deadlines)
    acc = csd[rows, switch] + crd[rows, deadlines] - crd[rows, switch]
    shortfall = acc < cfg.rate

    rounds = 1 + shortfall[:, : M - 1].sum(axis=1)
    delivered = ~shortfall[:, M - 1]
    phase = np.minimum(bc, M)
    return (
        shortfall.sum(axis=0),
        np.bincount(phase, minlength=M + 1)[1:],
        int(rounds.sum()),
        int((rounds * rounds).sum()),
        int(rounds[delivered].sum()),
    )


def _protocol_task(args):
    return _protocol_chunk(*args)


def _chunk_sizes(trials: int):
    full, rest = divmod(trials, CHUNK_TRIALS)
    sizes = [CHUNK_TRIALS] * full
    if rest:
        sizes.append(rest)
    return sizes


def simulate_protocol(
    cfg: SystemConfig, trials: int, rng_seed: int = 0, workers: int = 1
) -> SimResult:
    """Replay the two-phase protocol `trials` times and aggregate counters."""
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    tasks = [(cfg, rng_seed, i, n) for i, n in enumerate(_chunk_sizes(trials))]
    if workers == 1 or len(tasks) == 1:
        parts = [_protocol_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_protocol_task, tasks, chunksize=4))

    M = cfg.max_rounds
    outage = np.zeros(M, dtype=np.int64)
    phase = np.zeros(M, dtype=np.int64)
    rounds_sum = rounds_sq = success_rounds = 0
    for out_c, ph_c, rs, rsq, srs in parts:
        outage += out_c
        phase += ph_c
        rounds_sum += rs
        rounds_sq += rsq
        success_rounds += srs
    return SimResult(
        trials=trials,
        seed=rng_seed,
        rate=cfg.rate,
        outage_counts=tuple(int(c) for c in outage),
        phase_counts=tuple(int(c) for c in phase),
        rounds_sum=rounds_sum,
        rounds_sq_sum=rounds_sq,
        success_rounds_sum=success_rounds,
    )


def empirical_cdf(spec: ProductRvSpec, trials: int, seed: int, grid):
    """Empirical CDF of the accumulated-SNR product on a sorted grid.

    Returns (probabilities, binomial standard errors) as arrays aligned
    with `grid`.  This is the ground-truth surface the matched CDF is
    judged against, so it never touches the analytical pipeline.
    """
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("grid must be a non-empty 1-D array")
    if np.any(np.diff(grid) < 0):
        raise ConfigError("grid must be sorted ascending")

    counts = np.zeros(grid.size, dtype=np.int64)
    for chunk, n in enumerate(_chunk_sizes(trials)):
        rng = _stream(seed, chunk)
        y = np.ones(n)
        for link, rounds in spec.segments:
            sel = [r - 1 for r in rounds]
            omega = [link.omega[i] for i in sel]
            lam = [link.lam[i] for i in sel]
            block = _draw_block(link.m, omega, lam, spec.snr_scale, n, rng)
            y *= np.prod(1.0 + block, axis=1)
        counts += np.searchsorted(np.sort(y), grid, side="right")
    probs = counts / trials
    return probs, np.sqrt(probs * (1.0 - probs) / trials)
