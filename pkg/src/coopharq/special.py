"""Quadrature rules and the special functions the analytical pipeline needs.

Everything here is a pure function of its arguments.  Quadrature rules are
computed at first use by Newton iteration on recurrence-evaluated Laguerre
polynomials (no printed tables) and cached; rules are immutable and safe to
share across threads.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import erfc, gammaln, ive, jv
from scipy.special import logsumexp

from .errors import ConfigError, NumericFailure

__all__ = [
    "QuadratureRule",
    "gauss_laguerre",
    "hyp0f1",
    "lauricella_psi2",
    "lambert_w_minus1",
    "std_normal_cdf",
    "euler_phi",
    "expected_log1p_gamma",
    "lauricella_phi2_cdf",
]

_MAX_ORDER = 64


@dataclass(frozen=True)
class QuadratureRule:
    """Gauss-Laguerre nodes and weights for the weight function e^{-t}."""

    order: int
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != (self.order,) or weights.shape != (self.order,):
            raise ConfigError("rule arrays must both have length `order`")
        if not (np.all(nodes > 0) and np.all(np.diff(nodes) > 0)):
            raise ConfigError("nodes must be strictly increasing and positive")
        if not np.all(weights > 0):
            raise ConfigError("weights must be positive")
        nodes.flags.writeable = False
        weights.flags.writeable = False
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)


@lru_cache(maxsize=None)
def _laguerre_rule(order: int, alpha: float) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights for weight x^alpha e^{-x}; Newton on the three-term
    recurrence.  Total weight mass is Gamma(alpha + 1)."""
    n = order
    x = np.empty(n)
    w = np.empty(n)
    z = 0.0
    for i in range(1, n + 1):
        # initial guesses, standard asymptotic seeds
        if i == 1:
            z = (1.0 + alpha) * (3.0 + 0.92 * alpha) / (1.0 + 2.4 * n + 1.8 * alpha)
        elif i == 2:
            z += (15.0 + 6.25 * alpha) / (1.0 + 0.9 * alpha + 2.5 * n)
        else:
            ai = i - 2
            z += ((1.0 + 2.55 * ai) / (1.9 * ai) + 1.26 * ai * alpha / (1.0 + 3.5 * ai)) * (
                z - x[i - 3]
            ) / (1.0 + 0.3 * alpha)
        pp = 0.0
        p2 = 0.0
        for _ in range(120):
            p1, p2 = 1.0, 0.0
            for j in range(1, n + 1):
                p1, p2 = ((2 * j - 1 + alpha - z) * p1 - (j - 1 + alpha) * p2) / j, p1
            pp = (n * p1 - (n + alpha) * p2) / z
            z_old = z
            z -= p1 / pp
            # 1e-14 stopping + the extra step already taken polishes to ulp level
            if abs(z - z_old) <= 1e-14 * max(1.0, abs(z)):
                break
        else:
            raise NumericFailure(f"Laguerre root {i} of {n} did not converge")
        x[i - 1] = z
        w[i - 1] = -math.exp(gammaln(alpha + n) - gammaln(n)) / (pp * n * p2)
    # rescale to the exact total mass Gamma(alpha+1); removes ~1e-12 drift
    # accumulated by the per-root weight formula
    w *= math.exp(gammaln(alpha + 1.0)) / w.sum()
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_laguerre(order: int) -> QuadratureRule:
    """Gauss-Laguerre rule of the given order for weight e^{-t} on (0, inf)."""
    if not isinstance(order, (int, np.integer)) or isinstance(order, bool):
        raise ConfigError("order must be an integer")
    if not 1 <= order <= _MAX_ORDER:
        raise ConfigError(f"order must be in [1, {_MAX_ORDER}], got {order}")
    nodes, weights = _laguerre_rule(int(order), 0.0)
    return QuadratureRule(order=int(order), nodes=nodes, weights=weights)


@lru_cache(maxsize=None)
def _leggauss(pts: int) -> tuple[np.ndarray, np.ndarray]:
    gn, gw = leggauss(pts)
    gn.flags.writeable = False
    gw.flags.writeable = False
    return gn, gw


@lru_cache(maxsize=None)
def _log_panel_rule(lo: float, hi: float, width: float = 1.0, pts: int = 16):
    """Composite Gauss-Legendre rule in ln x over [lo, hi], Jacobian folded
    into the weights.  Resolves integrands whose structure spans many decades
    (boundary layers at x ~ 1/c for large c) at fixed cost."""
    s0, s1 = math.log(lo), math.log(hi)
    n_pan = max(1, math.ceil((s1 - s0) / width))
    edges = np.linspace(s0, s1, n_pan + 1)
    gn, gw = _leggauss(pts)
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    x = np.exp(mid + half * gn[None, :]).ravel()
    w = (half * gw[None, :]).ravel() * x
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def _hyp0f1_series(m: float, x: float) -> float:
    term = 1.0
    total = 1.0
    for k in range(400):
        term *= x / ((m + k) * (k + 1))
        total += term
        if abs(term) <= 1e-17 * abs(total):
            return total
    raise NumericFailure(f"hyp0f1 series stalled at m={m}, x={x}")


def _log_hyp0f1_large(m: float, x: float) -> float:
    # 0F1(;m;x) = Gamma(m) x^{(1-m)/2} I_{m-1}(2 sqrt x); ive = I_nu e^{-|z|}
    rx = math.sqrt(x)
    return float(gammaln(m) - (m - 1) * 0.5 * math.log(x) + math.log(ive(m - 1, 2 * rx)) + 2 * rx)


def hyp0f1(m: float, x: float) -> float:
    """Confluent hypergeometric limit function 0F1(;m;x).

    Series for small |x|; Bessel relations past that so large arguments
    neither overflow nor lose precision to cancellation.
    """
    if not (isinstance(m, (int, float, np.floating, np.integer)) and math.isfinite(m)) or m <= 0:
        raise ConfigError(f"m must be a positive finite real, got {m!r}")
    if not math.isfinite(x):
        raise ConfigError(f"x must be finite, got {x!r}")
    m, x = float(m), float(x)
    if abs(x) <= 25.0:
        return _hyp0f1_series(m, x)
    if x > 0:
        return math.exp(_log_hyp0f1_large(m, x))
    # 0F1(;m;-y) = Gamma(m) y^{(1-m)/2} J_{m-1}(2 sqrt y)
    y = -x
    ry = math.sqrt(y)
    return float(math.exp(gammaln(m) - (m - 1) * 0.5 * math.log(y)) * jv(m - 1, 2 * ry))


def _log_hyp0f1_vec(m: float, xs: np.ndarray) -> np.ndarray:
    """log 0F1(;m;x) elementwise for x >= 0."""
    xs = np.asarray(xs, dtype=float)
    out = np.empty_like(xs)
    small = xs <= 25.0
    if np.any(small):
        out[small] = np.log([_hyp0f1_series(m, float(v)) for v in xs[small]])
    if np.any(~small):
        big = xs[~small]
        r = np.sqrt(big)
        out[~small] = gammaln(m) - (m - 1) * 0.5 * np.log(big) + np.log(ive(m - 1, 2 * r)) + 2 * r
    return out


def _log_lauricella_psi2(m: float, args: np.ndarray, order: int) -> float:
    t, w = _laguerre_rule(order, m - 1.0)
    acc = np.zeros(len(t))
    for a in args:
        if a < 0:
            raise ConfigError("psi2 arguments must be non-negative")
        if a > 0:
            acc += _log_hyp0f1_vec(m, a * t)
    return float(logsumexp(np.log(w) + acc) - gammaln(m))


def lauricella_psi2(m: float, args, quad: QuadratureRule | None = None) -> float:
    """Confluent Lauricella function Psi2 with all upper indices equal to m.

    Evaluated through its single Gamma-mixture integral with a dedicated
    generalized Gauss-Laguerre rule (weight t^{m-1} e^{-t}); the passed rule
    only sets the order.  The multivariate series is not used: it converges
    too slowly for strongly correlated argument ranges.
    """
    if m <= 0 or not math.isfinite(m):
        raise ConfigError(f"m must be a positive finite real, got {m!r}")
    args = np.atleast_1d(np.asarray(args, dtype=float))
    if args.size == 0:
        raise ConfigError("args must be non-empty")
    if not np.all(np.isfinite(args)):
        raise ConfigError("args must be finite")
    order = quad.order if quad is not None else 64
    return math.exp(_log_lauricella_psi2(float(m), args, order))


_BRANCH_POINT = -1.0 / math.e


def lambert_w_minus1(x: float) -> float:
    """Lower real branch of Lambert W: the solution w <= -1 of w e^w = x."""
    if not (_BRANCH_POINT <= x < 0):
        raise ConfigError(f"x must lie in [-1/e, 0), got {x!r}")
    if x == _BRANCH_POINT:
        return -1.0
    if x < -0.2:
        # near the branch point: series seed in p = -sqrt(2(1+ex)), then Halley
        p = -math.sqrt(max(0.0, 2.0 * (1.0 + math.e * x)))
        w = -1.0 + p - p * p / 3.0 + 11.0 * p**3 / 72.0
        for _ in range(80):
            ew = math.exp(w)
            f = w * ew - x
            fp = ew * (w + 1.0)
            step = f / (fp - f * (w + 2.0) / (2.0 * (w + 1.0)))
            w -= step
            if abs(step) <= 1e-15 * abs(w):
                break
        return w
    # far from the branch: Newton on w + ln(-w) = ln(-x), immune to exp underflow
    lx = math.log(-x)
    w = lx - math.log(-lx)
    for _ in range(80):
        g = w + math.log(-w) - lx
        step = g / (1.0 + 1.0 / w)
        w -= step
        if abs(step) <= 1e-15 * abs(w):
            break
    return w


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via the complementary error function."""
    if not math.isfinite(x):
        raise ConfigError(f"x must be finite, got {x!r}")
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _std_normal_cdf_vec(x: np.ndarray) -> np.ndarray:
    return 0.5 * erfc(-np.asarray(x, dtype=float) / math.sqrt(2.0))


def euler_phi(q: float) -> float:
    """Euler function prod_{k>=1} (1 - q^k), truncated once q^k < 1e-16."""
    if not (0.0 < q < 1.0):
        raise ConfigError(f"q must lie in (0, 1), got {q!r}")
    lq = math.log(q)
    kmax = max(1, math.ceil(math.log(1e-16) / lq))
    out = 1.0
    for start in range(1, kmax + 1, 1_000_000):
        k = np.arange(start, min(start + 1_000_000, kmax + 1))
        out *= float(np.prod(-np.expm1(k * lq)))
    return out


def expected_log1p_gamma(m: float, mean: float) -> float:
    """E[ln(1+g)] for g ~ Gamma(shape m, mean `mean`), by adaptive quadrature
    split at the density mode scale t = m."""
    if m <= 0 or not math.isfinite(m):
        raise ConfigError(f"m must be a positive finite real, got {m!r}")
    if mean < 0 or not math.isfinite(mean):
        raise ConfigError(f"mean must be a non-negative finite real, got {mean!r}")
    if mean == 0.0:
        return 0.0
    from scipy.integrate import quad

    c = mean / m

    def f(t):
        return math.log1p(c * t) * math.exp((m - 1) * math.log(t) - t - gammaln(m))

    lo = quad(f, 0.0, m, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    hi = quad(f, m, np.inf, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return lo + hi


_TALBOT_NODES = 48


def _talbot_cdf(log_mgf, y: float, n: int) -> float:
    """Fixed-Talbot inversion of exp(log_mgf(s))/s at argument y."""
    r = 2.0 * n / (5.0 * y)
    total = 0.5 * math.exp(log_mgf(np.array([r + 0j]))[0].real + r * y)
    theta = np.pi * np.arange(1, n) / n
    cot = 1.0 / np.tan(theta)
    s = r * theta * (cot + 1j)
    sigma = theta + (theta * cot - 1.0) * cot
    vals = np.exp(log_mgf(s) + y * s)
    total += float(np.sum((vals * (1.0 + 1j * sigma)).real))
    return total * r / n


def lauricella_phi2_cdf(shape: float, scales, y: float, order_sum: float) -> float:
    """CDF of a sum of correlated Gamma variates, written in closed form by
    the confluent Lauricella Phi2 function; evaluated by fixed-Talbot
    numerical inversion of the product-form transform rather than the
    multivariate series (whose term count explodes with the sum order).

    `order_sum` must equal M*shape + 1, the order parameter carried by the
    closed form; it is validated, not used in the computation.  Absolute
    accuracy is limited by the contour arithmetic to roughly 1e-8.
    """
    if shape <= 0 or not math.isfinite(shape):
        raise ConfigError(f"shape must be a positive finite real, got {shape!r}")
    scales = np.atleast_1d(np.asarray(scales, dtype=float))
    if scales.size == 0 or not np.all(np.isfinite(scales)) or not np.all(scales > 0):
        raise ConfigError("scales must be a non-empty list of positive reals")
    if not (math.isfinite(y) and y > 0):
        raise ConfigError(f"y must be a positive real, got {y!r}")
    expected = scales.size * shape + 1.0
    if not math.isclose(order_sum, expected, rel_tol=1e-9, abs_tol=1e-9):
        raise ConfigError(f"order_sum must be M*shape+1 = {expected}, got {order_sum}")

    def log_mgf(s):
        # transform of the CDF: prod_k (1 + scale_k s)^{-shape} / s
        acc = -np.log(s.astype(complex))
        for d in scales:
            acc -= shape * np.log(1.0 + d * s)
        return acc

    val = _talbot_cdf(log_mgf, float(y), _TALBOT_NODES)
    check = _talbot_cdf(log_mgf, float(y), _TALBOT_NODES - 8)
    if abs(val - check) > max(1e-7, 1e-6 * abs(val)):
        raise NumericFailure(
            f"transform inversion did not settle at y={y}: "
            f"{_TALBOT_NODES}-node value {val:.6e} vs {_TALBOT_NODES - 8}-node {check:.6e}"
        )
    return min(1.0, max(0.0, val))
