"""Inverse moments and log-domain statistics of shifted-SNR products.

The object of interest is Y = prod_l (1 + gamma_l) over one or two
independent link segments, where rounds within a segment are correlated
through a shared Gamma mixing variable.  Everything the CDF matcher needs
reduces to three quantities: alpha_n = E[Y^-n], mu = E[ln Y], and
sigma^2 = Var[ln Y].

Three evaluation routes coexist:

* "laplace" (default): the joint transform E[exp(-sum x_l gamma_l)] is known
  in closed form, so alpha_n factors through a one-dimensional mixing
  integral whose inner integrals are computed on log-spaced composite
  Gauss-Legendre panels.  No fixed node set has to chase the conditional
  distribution, so accuracy is uniform in the correlation level, including
  rho -> 1 where fixed-node discretizations of the conditional density lose
  the tail mass entirely.
* "kernel": the factored fixed-node discretization, cost O(N_t K N_Q).
* "literal": the same discretization without factoring, as an N_Q^K sum of
  node tuples weighted by the confluent Lauricella Psi2.  Exponential cost;
  kept (with the kernel route) as a cross-check oracle for moderate rho.

"kernel" and "literal" are two orderings of one sum and agree to floating
point; both are normalized by their own alpha_0 so the overall constant of
the discretization drops out.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import product as iter_product

import numpy as np
from scipy.special import gammaln, logsumexp

from .channel import LinkModel
from .errors import ConfigError, NumericFailure, ResourceLimit
from .special import (
    QuadratureRule,
    _laguerre_rule,
    _log_hyp0f1_vec,
    _log_panel_rule,
    expected_log1p_gamma,
)

__all__ = [
    "ProductRvSpec",
    "LogStats",
    "inverse_moment",
    "log_mean",
    "log_variance",
    "compute_log_stats",
]

_DEFAULT_NQ = 32
_DEFAULT_NT = 64
_WORK_BOUND = 32**6  # literal-path tuple budget: N_Q^K may not exceed this

# panel grids; x covers boundary layers at 1/c down to c ~ 1e14 and holds
# the x^{n-1} e^{-x} mass up to n = 24, t covers shape >= 0.5 mixing mass
_X_GRID = (1e-18, 260.0, 1.0, 16)
_T_GRID = (1e-24, 160.0, 1.0, 16)
_COV_GRID = (1e-18, 60.0, 1.0, 16)


@dataclass(frozen=True)
class ProductRvSpec:
    """Y = prod (1+gamma_l) across at most two independent link segments.

    Each segment is a (LinkModel, rounds) pair, rounds being 1-based indices
    into the link's per-round lists.  Segment round ranges must be disjoint
    and contiguous overall, mirroring the split of a delivery phase into
    broadcast rounds on one link and relayed rounds on another.
    """

    segments: tuple
    snr_scale: float

    def __post_init__(self):
        if not (isinstance(self.snr_scale, (int, float)) and math.isfinite(self.snr_scale) and self.snr_scale > 0):
            raise ConfigError(f"snr_scale must be a positive real, got {self.snr_scale!r}")
        segs = []
        for entry in self.segments:
            try:
                link, rounds = entry
            except (TypeError, ValueError) as exc:
                raise ConfigError("each segment must be a (LinkModel, rounds) pair") from exc
            if not isinstance(link, LinkModel):
                raise ConfigError("segment link must be a LinkModel")
            rounds = tuple(int(r) for r in rounds)
            if not rounds:
                raise ConfigError("segment round list must be non-empty")
            if any(r < 1 or r > link.rounds for r in rounds):
                raise ConfigError(f"round indices must lie in [1, {link.rounds}]")
            if any(b - a != 1 for a, b in zip(rounds, rounds[1:])):
                raise ConfigError("segment rounds must be consecutive ascending")
            segs.append((link, rounds))
        if not 1 <= len(segs) <= 2:
            raise ConfigError("spec needs one or two segments")
        covered = sorted(r for _, rounds in segs for r in rounds)
        if len(set(covered)) != len(covered) or covered != list(range(covered[0], covered[-1] + 1)):
            raise ConfigError("segment round ranges must be disjoint and contiguous overall")
        object.__setattr__(self, "segments", tuple(segs))
        object.__setattr__(self, "snr_scale", float(self.snr_scale))

    @property
    def total_rounds(self) -> int:
        return sum(len(rounds) for _, rounds in self.segments)


@dataclass(frozen=True)
class LogStats:
    """mu, sigma^2 and the inverse-moment ladder of one product variable."""

    mu: float
    sigma2: float
    inv_moments: tuple

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.inv_moments)
        if not alphas or alphas[0] != 1.0:
            raise NumericFailure("inverse-moment ladder must start at alpha_0 = 1")
        for n in range(1, len(alphas)):
            if not 0.0 < alphas[n] < alphas[n - 1]:
                raise NumericFailure(
                    f"inverse moments must strictly decrease within (0,1]; "
                    f"alpha_{n}={alphas[n]!r} after alpha_{n-1}={alphas[n-1]!r}"
                )
        if not (math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise NumericFailure(f"sigma2 must be positive, got {self.sigma2!r}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma2", float(self.sigma2))
        object.__setattr__(self, "inv_moments", alphas)


def _round_params(link: LinkModel, rounds, snr_scale: float):
    """(m, omega', lambda) arrays for the chosen 1-based rounds."""
    idx = [r - 1 for r in rounds]
    omp = np.array([link.omega[i] for i in idx]) * snr_scale
    lam = np.array([link.lam[i] for i in idx])
    return link.m, omp, lam


# ---------------------------------------------------------------- laplace --


@lru_cache(maxsize=256)
def _b_rows(n_max: int) -> np.ndarray:
    """Rows n=0..n_max of w_x x^{n-1} e^{-x} / Gamma(n) on the x panel grid.

    Row 0 is unused (alpha_0 is pinned to 1) and left as zeros.
    """
    x, w = _log_panel_rule(*_X_GRID)
    ns = np.arange(1, n_max + 1)[:, None]
    rows = np.exp((ns - 1) * np.log(x)[None, :] - x[None, :] - gammaln(ns)) * w[None, :]
    out = np.vstack([np.zeros_like(x), rows])
    out.flags.writeable = False
    return out


@lru_cache(maxsize=256)
def _t_weights(m: float) -> np.ndarray:
    t, w = _log_panel_rule(*_T_GRID)
    v = np.exp((m - 1) * np.log(t) - t - gammaln(m)) * w
    v.flags.writeable = False
    return v


@lru_cache(maxsize=1024)
def _round_factor(m: float, c: float, theta: float, n_max: int) -> np.ndarray:
    """T_l(t) for n=0..n_max: the round's inner transform integral on the t
    grid.  Shape (n_max+1, T) when the round is mixed (theta>0), (n_max+1, 1)
    when it is independent of the mixer."""
    x, _ = _log_panel_rule(*_X_GRID)
    B = _b_rows(n_max)
    a = np.exp(-m * np.log1p(c * x))
    if theta == 0.0:
        vals = B @ a
        vals[0] = 1.0
        out = vals[:, None]
    else:
        t, _ = _log_panel_rule(*_T_GRID)
        g = theta * c * x / (1.0 + c * x)
        emat = np.exp(-np.outer(t, g))  # (T, J)
        out = (B * a[None, :]) @ emat.T  # (n_max+1, T)
        out[0] = 1.0
    out.flags.writeable = False
    return out


@lru_cache(maxsize=4096)
def _segment_alphas_laplace(link: LinkModel, rounds: tuple, snr_scale: float, n_max: int) -> tuple:
    m, omp, lam = _round_params(link, rounds, snr_scale)
    if len(rounds) == 1:
        # single round: the mixture marginal is exactly Gamma(m, omega'/m)
        theta_c = [(float(omp[0] / m), 0.0)]
    else:
        c = omp * (1.0 - lam**2) / m
        theta = lam**2 / (1.0 - lam**2)
        theta_c = [(float(ci), float(ti)) for ci, ti in zip(c, theta)]
    prod = None
    for c_l, th_l in theta_c:
        f = _round_factor(m, c_l, th_l, n_max)
        prod = f if prod is None else prod * f
    if prod.shape[1] == 1:
        alphas = prod[:, 0].copy()
    else:
        alphas = prod @ _t_weights(m)
    alphas[0] = 1.0
    return tuple(float(a) for a in alphas)


def _alphas_laplace(spec: ProductRvSpec, n_max: int) -> np.ndarray:
    out = np.ones(n_max + 1)
    for link, rounds in spec.segments:
        out = out * np.asarray(_segment_alphas_laplace(link, rounds, spec.snr_scale, n_max))
    return out


# ----------------------------------------------------------------- kernel --


def _kernel_weights(m: float, omp: np.ndarray, lam: np.ndarray):
    s = omp * (1.0 - lam**2) / m
    theta = lam**2 / (1.0 - lam**2)
    varpi = theta / (1.0 + theta.sum())
    return s, theta, varpi


def _segment_alphas_kernel(link, rounds, snr_scale, ns, n_q, n_t) -> np.ndarray:
    """Factored fixed-node discretization, normalized by its own alpha_0
    (computed as the n=0 row of the same sum, so the discretization's overall
    constant cancels)."""
    m, omp, lam = _round_params(link, rounds, snr_scale)
    s, theta, varpi = _kernel_weights(m, omp, lam)
    zeta, w_in = _laguerre_rule(n_q, m - 1.0)
    log_w_in = np.log(w_in) - gammaln(m)
    u, w_out = _laguerre_rule(n_t, m - 1.0)
    log_w_out = np.log(w_out) - gammaln(m)
    ns_all = np.concatenate([[0.0], np.asarray(ns, dtype=float)])
    # acc[n, q] accumulates sum_l log S_l with
    # S_l[n, q] = sum_p w̄_p (1+s_l ζ_p)^{-n} 0F1(m; ϖ_l ζ_p u_q)
    acc = np.zeros((len(ns_all), len(u)))
    for l in range(len(s)):
        base = _log_hyp0f1_vec(m, np.outer(varpi[l] * zeta, u)) + log_w_in[:, None]  # (P, Q)
        tilt = -ns_all[:, None] * np.log1p(s[l] * zeta)[None, :]  # (N+1, P)
        acc += logsumexp(tilt[:, :, None] + base[None, :, :], axis=1)
    log_alpha = logsumexp(log_w_out[None, :] + acc, axis=1)
    return np.exp(log_alpha[1:] - log_alpha[0])


def _alphas_kernel(spec: ProductRvSpec, ns, n_q: int, n_t: int) -> np.ndarray:
    out = np.ones(len(ns))
    for link, rounds in spec.segments:
        out = out * _segment_alphas_kernel(link, rounds, spec.snr_scale, ns, n_q, n_t)
    return out


def _segment_alpha_literal(link, rounds, snr_scale, n, n_q, n_t) -> float:
    """Tuple sum over node vectors, Psi2 evaluated per tuple.  Exponential
    in the round count; test oracle only."""
    from .special import _log_lauricella_psi2

    m, omp, lam = _round_params(link, rounds, snr_scale)
    s, theta, varpi = _kernel_weights(m, omp, lam)
    zeta, w_in = _laguerre_rule(n_q, m - 1.0)
    log_w_in = np.log(w_in) - gammaln(m)
    K = len(s)
    terms = []
    terms0 = []
    for tup in iter_product(range(n_q), repeat=K):
        zt = zeta[list(tup)]
        logw = float(np.sum(log_w_in[list(tup)]))
        psi = _log_lauricella_psi2(m, varpi * zt, n_t)
        terms.append(logw + psi - n * float(np.sum(np.log1p(s * zt))))
        terms0.append(logw + psi)
    return float(np.exp(logsumexp(np.array(terms)) - logsumexp(np.array(terms0))))


# -------------------------------------------------------------- public API --


def _resolve_orders(quad: QuadratureRule | None):
    n_q = quad.order if quad is not None else _DEFAULT_NQ
    return n_q, _DEFAULT_NT


def _check_work_bound(spec: ProductRvSpec, n_q: int):
    if n_q**spec.total_rounds > _WORK_BOUND:
        raise ResourceLimit(
            f"node-tuple budget exceeded: {n_q}^{spec.total_rounds} > {_WORK_BOUND}; "
            "lower the quadrature order or the round count"
        )


def inverse_moment(spec: ProductRvSpec, n: int, quad: QuadratureRule | None = None, *, method: str = "auto") -> float:
    """alpha_n = E[Y^-n] for the product variable described by `spec`.

    `method` selects the route: "auto"/"laplace" (exact-transform panels,
    correlation-uniform accuracy), "kernel" (factored fixed-node sum, order
    taken from `quad`), "literal" (unfactored tuple sum).  Two-segment specs
    multiply per-segment values; the segments are independent links.
    """
    if not (isinstance(n, (int, np.integer)) and not isinstance(n, bool) and n >= 0):
        raise ConfigError(f"n must be a non-negative integer, got {n!r}")
    n_q, n_t = _resolve_orders(quad)
    _check_work_bound(spec, n_q)
    if n == 0:
        return 1.0
    if method in ("auto", "laplace"):
        return float(_alphas_laplace(spec, int(n))[n])
    if method == "kernel":
        return float(_alphas_kernel(spec, [int(n)], n_q, n_t)[0])
    if method == "literal":
        out = 1.0
        for link, rounds in spec.segments:
            out *= _segment_alpha_literal(link, rounds, spec.snr_scale, int(n), n_q, n_t)
        return out
    raise ConfigError(f"unknown method {method!r}")


def log_mean(spec: ProductRvSpec) -> float:
    """mu = E[ln Y]; per-round marginals are exactly Gamma, so this is a sum
    of one-dimensional integrals regardless of correlation."""
    total = 0.0
    for link, rounds in spec.segments:
        m, omp, lam = _round_params(link, rounds, spec.snr_scale)
        for mean in omp:
            total += expected_log1p_gamma(m, float(mean))
    return total


@lru_cache(maxsize=1024)
def _var_log1p_gamma(m: float, mean: float) -> float:
    from scipy.integrate import quad as _quad

    c = mean / m

    def f(t):
        return math.log1p(c * t) ** 2 * math.exp((m - 1) * math.log(t) - t - gammaln(m))

    lo = _quad(f, 0.0, m, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    hi = _quad(f, m, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    mu = expected_log1p_gamma(m, mean)
    return lo + hi - mu * mu


@lru_cache(maxsize=2048)
def _cov_log1p_laplace(m: float, omp_i: float, omp_j: float, lam_i: float, lam_j: float) -> float:
    """Cov(ln(1+gamma_i), ln(1+gamma_j)) for two rounds sharing a mixer.

    Double integral of the transform-difference identity
    Cov = ∬ dx dy / (x y) e^{-x-y} [L_ij(x,y) - L_i(x) L_j(y)]; the bracket
    is evaluated in a cancellation-free form and kept on panel grids.
    """
    if lam_i == 0.0 or lam_j == 0.0:
        return 0.0
    x, wx = _log_panel_rule(*_COV_GRID)
    th_i = lam_i**2 / (1.0 - lam_i**2)
    th_j = lam_j**2 / (1.0 - lam_j**2)
    c_i = omp_i * (1.0 - lam_i**2) / m
    c_j = omp_j * (1.0 - lam_j**2) / m
    A = th_i * c_i * x / (1.0 + c_i * x)
    B = th_j * c_j * x / (1.0 + c_j * x)
    S = A[:, None] + B[None, :]
    AB = A[:, None] * B[None, :]
    bracket = np.exp(-m * np.log1p(S)) * (-np.expm1(-m * np.log1p(AB / (1.0 + S))))
    u = wx * np.exp(-x - m * np.log1p(c_i * x)) / x
    v = wx * np.exp(-x - m * np.log1p(c_j * x)) / x
    return float(u @ bracket @ v)


def _cov_log1p_kernel(m, omp_i, omp_j, lam_i, lam_j, n_q, n_t) -> float:
    """Fixed-node discretization of the covariance term: the pairwise sum
    with Psi2 of two variables, minus the same-rule product of means.
    Oracle for moderate correlation."""
    s_i = omp_i * (1.0 - lam_i**2) / m
    s_j = omp_j * (1.0 - lam_j**2) / m
    th_i = lam_i**2 / (1.0 - lam_i**2)
    th_j = lam_j**2 / (1.0 - lam_j**2)
    zeta, w_in = _laguerre_rule(n_q, m - 1.0)
    wbar = w_in / math.exp(gammaln(m))
    u, w_out = _laguerre_rule(n_t, m - 1.0)
    wbar_out = w_out / math.exp(gammaln(m))

    def mean_hat(s_l, th_l):
        varpi = th_l / (1.0 + th_l)
        f = np.exp(_log_hyp0f1_vec(m, np.outer(zeta * varpi, u)))  # (P, Q)
        inner = (wbar * np.log1p(s_l * zeta)) @ f  # (Q,)
        return (1.0 + th_l) ** (-m) * float(inner @ wbar_out)

    varpi_i = th_i / (1.0 + th_i + th_j)
    varpi_j = th_j / (1.0 + th_i + th_j)
    fi = np.exp(_log_hyp0f1_vec(m, np.outer(zeta * varpi_i, u)))
    fj = np.exp(_log_hyp0f1_vec(m, np.outer(zeta * varpi_j, u)))
    gi = (wbar * np.log1p(s_i * zeta)) @ fi  # (Q,)
    gj = (wbar * np.log1p(s_j * zeta)) @ fj
    second = (1.0 + th_i + th_j) ** (-m) * float((gi * gj) @ wbar_out)
    return second - mean_hat(s_i, th_i) * mean_hat(s_j, th_j)


def log_variance(spec: ProductRvSpec, quad: QuadratureRule | None = None, *, method: str = "auto") -> float:
    """sigma^2 = Var[ln Y]: per-round variances plus twice the within-segment
    covariances.  Cross-segment terms are zero (independent links)."""
    n_q, n_t = _resolve_orders(quad)
    total = 0.0
    for link, rounds in spec.segments:
        m, omp, lam = _round_params(link, rounds, spec.snr_scale)
        for mean in omp:
            total += _var_log1p_gamma(m, float(mean))
        K = len(rounds)
        for i in range(K):
            for j in range(i + 1, K):
                if method in ("auto", "laplace"):
                    cov = _cov_log1p_laplace(m, float(omp[i]), float(omp[j]), float(lam[i]), float(lam[j]))
                elif method == "kernel":
                    cov = _cov_log1p_kernel(m, float(omp[i]), float(omp[j]), float(lam[i]), float(lam[j]), n_q, n_t)
                else:
                    raise ConfigError(f"unknown method {method!r}")
                total += 2.0 * cov
    if total <= 0.0:
        raise NumericFailure(f"computed sigma2 = {total!r} is not positive")
    return total


def compute_log_stats(spec: ProductRvSpec, degree: int, quad: QuadratureRule | None = None) -> LogStats:
    """LogStats with the inverse-moment ladder alpha_0 .. alpha_{2*degree}."""
    if not (isinstance(degree, (int, np.integer)) and degree >= 0):
        raise ConfigError(f"degree must be a non-negative integer, got {degree!r}")
    n_q, _ = _resolve_orders(quad)
    _check_work_bound(spec, n_q)
    alphas = _alphas_laplace(spec, 2 * int(degree))
    return LogStats(mu=log_mean(spec), sigma2=log_variance(spec, quad), inv_moments=tuple(alphas))
