"""Inverse-moment-matched CDF on a Lognormal base.

The distribution of ln Y is approximated by a Lognormal base density tilted
by an orthonormal polynomial series in y^-1.  Matching the inverse moments
alpha_n pins the series coefficients; the result evaluates as a weighted sum
of shifted Lognormal CDFs.  The raw coefficient vector of the monomial basis
is never formed by matrix inversion: the Gram matrix of inverse powers is
catastrophically ill-conditioned in double precision well below degree 10,
which is exactly why the orthonormal recursion exists.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .errors import ConfigError, NumericFailure, RangeError
from .special import _std_normal_cdf_vec, euler_phi, lambert_w_minus1
from .moments import LogStats

__all__ = [
    "LognormalBase",
    "MatchedCdf",
    "base_inverse_moment",
    "basis_coefficients",
    "recursive_gram_inverse",
    "build_matched_cdf",
    "eval_cdf",
    "select_degree",
]

DEGREE_GUARD = 12
_BASIS_GUARD = 30


@dataclass(frozen=True)
class LognormalBase:
    """Parameters of the base density: ln Y ~ Normal(mu, sigma2)."""

    mu: float
    sigma2: float

    def __post_init__(self):
        if not (isinstance(self.mu, (int, float)) and math.isfinite(self.mu)):
            raise ConfigError(f"mu must be a finite real, got {self.mu!r}")
        if not (isinstance(self.sigma2, (int, float)) and math.isfinite(self.sigma2) and self.sigma2 > 0):
            raise ConfigError(f"sigma2 must be a positive real, got {self.sigma2!r}")
        object.__setattr__(self, "mu", float(self.mu))
        object.__setattr__(self, "sigma2", float(self.sigma2))


@dataclass(frozen=True)
class MatchedCdf:
    """Weighted-Lognormal-CDF approximation of P(Y <= y)."""

    base: LognormalBase
    degree: int
    kappa: tuple
    eta: tuple
    coeff_rows: tuple

    def __post_init__(self):
        kappa = tuple(float(v) for v in self.kappa)
        eta = tuple(float(v) for v in self.eta)
        if len(kappa) != self.degree + 1 or len(eta) != self.degree + 1:
            raise ConfigError("kappa and eta must both have degree+1 entries")
        if abs(sum(kappa) - 1.0) > 1e-8:
            raise NumericFailure(f"kappa weights sum to {sum(kappa)!r}, not 1")
        if eta[0] != 1.0:
            raise NumericFailure(f"eta_0 must be 1, got {eta[0]!r}")
        object.__setattr__(self, "kappa", kappa)
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "coeff_rows", tuple(tuple(float(v) for v in row) for row in self.coeff_rows))

    def as_record(self) -> dict:
        """Diagnostic record for structured output."""
        return {
            "mu": self.base.mu,
            "sigma2": self.base.sigma2,
            "degree": self.degree,
            "kappa": list(self.kappa),
            "eta": list(self.eta),
        }


def base_inverse_moment(base: LognormalBase, k: int) -> float:
    """nu_k = E[Y^-k] under the base density: exp(k^2 sigma2/2 - k mu)."""
    if not (isinstance(k, (int, np.integer)) and not isinstance(k, bool) and k >= 0):
        raise ConfigError(f"k must be a non-negative integer, got {k!r}")
    arg = 0.5 * k * k * base.sigma2 - k * base.mu
    if 0.5 * k * k * base.sigma2 > 700.0:
        raise RangeError(
            f"base inverse moment overflows double precision at k={k} "
            f"(k^2 sigma2/2 = {0.5 * k * k * base.sigma2:.1f}); lower the degree"
        )
    return math.exp(arg)


def _cum_log_qfactors(sigma2: float, count: int) -> np.ndarray:
    """cum[j] = sum_{i<=j} ln(1 - exp(-sigma2 i)), cum[0] = 0."""
    i = np.arange(1, count + 1)
    return np.concatenate([[0.0], np.cumsum(np.log(-np.expm1(-sigma2 * i)))])


def basis_coefficients(base: LognormalBase, l: int) -> np.ndarray:
    """Row l of the orthonormal-basis coefficients, closed form.

    The basis polynomial is b_l(y) = sum_k c_{l,k} y^-k, orthonormal under
    the base density.  Row magnitudes grow like exp(O(l^2) sigma2), hence the
    hard guard.
    """
    if not (isinstance(l, (int, np.integer)) and not isinstance(l, bool) and l >= 0):
        raise ConfigError(f"l must be a non-negative integer, got {l!r}")
    if l > _BASIS_GUARD:
        raise RangeError(f"basis row {l} exceeds the overflow guard ({_BASIS_GUARD})")
    if l == 0:
        return np.array([1.0])
    mu, s2 = base.mu, base.sigma2
    cum = _cum_log_qfactors(s2, l)
    k = np.arange(l + 1)
    logmag = k * mu + 0.5 * s2 * (k - l - 2 * k * k) + 0.5 * cum[l] - cum[k] - cum[l - k]
    if np.max(logmag) > 700.0:
        raise RangeError(
            f"basis row {l} overflows double precision (max log magnitude "
            f"{np.max(logmag):.1f}); lower the degree or widen sigma2"
        )
    return (-1.0) ** (l + k) * np.exp(logmag)


def recursive_gram_inverse(base: LognormalBase, l: int) -> np.ndarray:
    """Inverse of the (l+1)x(l+1) Hankel Gram matrix A_l = [nu_{i+j}], built
    by the block recursion from A_0 = [1].  Oracle path for the closed-form
    coefficients; never the production route."""
    if not (isinstance(l, (int, np.integer)) and not isinstance(l, bool) and l >= 1):
        raise ConfigError(f"l must be a positive integer, got {l!r}")
    nu = np.array([base_inverse_moment(base, k) for k in range(2 * l + 1)])
    inv = np.array([[1.0]])
    for j in range(1, l + 1):
        v = nu[j : 2 * j]
        av = inv @ v
        beta = nu[2 * j] - v @ av
        if beta <= 0.0:
            raise NumericFailure(
                f"Gram matrix lost positive definiteness at l={j} (pivot {beta!r})"
            )
        top = inv + np.outer(av, av) / beta
        inv = np.block([[top, (-av / beta)[:, None]], [(-av / beta)[None, :], np.array([[1.0 / beta]])]])
    return inv


def _assemble_weights(base: LognormalBase, alphas, degree: int):
    """Fold the ladder through the basis into the mixture weights.

    The alternating sums lose about six digits to cancellation in double
    precision once the base mean grows past ~20 (high SNR, several rounds),
    which is enough to trip the weight-sum gate on healthy inputs.  The
    assembly is therefore done in 50-digit arithmetic; inputs and outputs
    stay double.
    """
    with mp.workdps(50):
        s2 = mp.mpf(base.sigma2)
        muv = mp.mpf(base.mu)
        cum = [mp.mpf(0)]
        for i in range(1, degree + 1):
            cum.append(cum[-1] + mp.log(1 - mp.exp(-s2 * i)))
        c = [
            [
                (-1) ** (l + k)
                * mp.exp(k * muv + s2 * (k - l - 2 * k * k) / 2 + cum[l] / 2 - cum[k] - cum[l - k])
                for k in range(l + 1)
            ]
            for l in range(degree + 1)
        ]
        al = [mp.mpf(float(a)) for a in alphas]
        eta = [mp.fsum(c[l][k] * al[k] for k in range(l + 1)) for l in range(degree + 1)]
        kappa = [
            mp.exp(k * k * s2 / 2 - k * muv)
            * mp.fsum(eta[l] * c[l][k] for l in range(k, degree + 1))
            for k in range(degree + 1)
        ]
        return (
            np.array([float(e) for e in eta]),
            np.array([float(k) for k in kappa]),
        )


def build_matched_cdf(stats: LogStats, degree: int, *, degree_guard: int = DEGREE_GUARD) -> MatchedCdf:
    """Match the inverse-moment ladder of `stats` at the given degree."""
    if not (isinstance(degree, (int, np.integer)) and not isinstance(degree, bool) and degree >= 0):
        raise ConfigError(f"degree must be a non-negative integer, got {degree!r}")
    if degree_guard > DEGREE_GUARD:
        warnings.warn(
            f"degree guard raised to {degree_guard}: beyond degree {DEGREE_GUARD} "
            "the basis powers overflow and cancellation dominates",
            RuntimeWarning,
            stacklevel=2,
        )
    if degree > degree_guard:
        raise RangeError(f"degree {degree} exceeds the guard ({degree_guard})")
    if len(stats.inv_moments) < degree + 1:
        raise ConfigError(
            f"stats carries {len(stats.inv_moments)} inverse moments; degree {degree} needs {degree + 1}"
        )
    base = LognormalBase(mu=stats.mu, sigma2=stats.sigma2)
    alphas = np.asarray(stats.inv_moments[: degree + 1])
    rows = [basis_coefficients(base, l) for l in range(degree + 1)]
    eta, kappa = _assemble_weights(base, alphas, degree)
    total = float(kappa.sum())
    if abs(total - 1.0) > 1e-6:
        raise NumericFailure(
            f"kappa weights sum to {total!r}; the moment ladder and the basis are inconsistent"
        )
    kappa /= total
    return MatchedCdf(
        base=base,
        degree=int(degree),
        kappa=tuple(kappa),
        eta=tuple(eta),
        coeff_rows=tuple(tuple(r) for r in rows),
    )


def eval_cdf(mc: MatchedCdf, y):
    """F~(y) = clamp sum_k kappa_k Phi((ln y + k sigma2 - mu)/sigma).

    Accepts a scalar or an array; clamps to [0,1].  Small excursions
    outside [0,1] are routine in the far tails (the truncated series is
    not pointwise a CDF), so the warning only fires once an excursion
    passes 1e-2 and the surface has left its demonstrated accuracy band.
    """
    y_arr = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y_arr)) or np.any(y_arr <= 0):
        raise ConfigError("y must be positive and finite")
    mu, s2 = mc.base.mu, mc.base.sigma2
    sigma = math.sqrt(s2)
    k = np.arange(mc.degree + 1)
    z = (np.log(y_arr)[..., None] + k * s2 - mu) / sigma
    raw = _std_normal_cdf_vec(z) @ np.asarray(mc.kappa)
    lo, hi = float(np.min(raw)), float(np.max(raw))
    if lo < -1e-2 or hi > 1.0 + 1e-2:
        warnings.warn(
            f"matched CDF clamped: raw range [{lo:.3e}, {hi:.3e}]", RuntimeWarning, stacklevel=2
        )
    out = np.clip(raw, 0.0, 1.0)
    return float(out) if np.isscalar(y) or np.ndim(y) == 0 else out


def _degree_constants(base: LognormalBase) -> tuple:
    """(log A, log B) of the truncation-error bound constants."""
    mu, s2 = base.mu, base.sigma2
    k0 = 0.5 * mu / s2 + 0.25
    log_a = s2 * k0 * ((mu / s2 + 0.5) - k0) - 2.0 * math.log(euler_phi(math.exp(-s2)))
    q = math.exp(-s2)
    r = q / (1.0 - q)
    log_b = 2.0 * log_a + math.log(r * ((1.0 + q) / (1.0 - q) ** 2 + 2.0 * q / (1.0 - q) + 1.0))
    return log_a, log_b


def _nmse_bound(base: LognormalBase, degree: int) -> float:
    """B (N+1)^2 e^{-N sigma2}: the tail NMSE bound at degree N."""
    _, log_b = _degree_constants(base)
    return math.exp(log_b + 2.0 * math.log(degree + 1.0) - degree * base.sigma2)


def select_degree(base: LognormalBase, epsilon: float, *, guard: int = DEGREE_GUARD) -> int:
    """Smallest degree whose tail NMSE bound stays below epsilon.

    Solves B (N+1)^2 e^{-N sigma2} <= epsilon through the lower Lambert W
    branch and rounds up.  When the W argument leaves [-1/e, 0) the bound is
    vacuous at every degree; 0 is returned and a RuntimeWarning raised.
    """
    if not (isinstance(epsilon, (int, float)) and math.isfinite(epsilon) and epsilon > 0):
        raise ConfigError(f"epsilon must be a positive real, got {epsilon!r}")
    s2 = base.sigma2
    _, log_b = _degree_constants(base)
    # -(sigma2/2) sqrt(eps/B) e^{-sigma2/2}, kept in logs until the last step
    log_mag = math.log(s2 / 2.0) + 0.5 * (math.log(epsilon) - log_b) - s2 / 2.0
    warg = -math.exp(log_mag)
    if not (-1.0 / math.e <= warg < 0.0):
        warnings.warn(
            f"truncation bound is vacuous here (W argument {warg:.3e}); returning degree 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0
    nbar = lambert_w_minus1(warg) / (-s2 / 2.0) - 1.0
    return int(min(max(math.ceil(nbar), 0), guard))
