"""Fading-statistics data model: links, correlation structure, SNR mapping.

A link carries per-round mean gains Omega_l and per-round correlation
coefficients lambda_l; the shared-mixture construction makes every pairwise
SNR correlation equal to lambda_l^2 * lambda_k^2.  Per-round transmit powers
and noise variances are deliberately not modeled separately: a single
transmit SNR gamma_T scales every Omega_l (the equal-SNR convention), so the
effective per-round scale is Omega'_l = Omega_l * gamma_T.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from .errors import ConfigError
from .special import QuadratureRule, _log_hyp0f1_vec, gauss_laguerre

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

__all__ = [
    "LinkModel",
    "SystemConfig",
    "constant_correlation",
    "cross_correlation",
    "joint_pdf",
    "load_config",
    "dump_config",
]


@dataclass(frozen=True)
class LinkModel:
    """One hop's fading statistics.

    `lam` holds the generalized correlation coefficients (the configuration
    file spells the key `lambda`; that name is reserved in Python).
    """

    m: float
    omega: tuple
    lam: tuple

    def __post_init__(self):
        if not (isinstance(self.m, (int, float)) and math.isfinite(self.m) and self.m >= 0.5):
            raise ConfigError(f"fading order m must be a real >= 0.5, got {self.m!r}")
        omega = tuple(float(v) for v in self.omega)
        lam = tuple(float(v) for v in self.lam)
        if len(omega) == 0 or len(omega) != len(lam):
            raise ConfigError("omega and lambda lists must be non-empty and equally long")
        if not all(math.isfinite(v) and v > 0 for v in omega):
            raise ConfigError("every omega entry must be a positive finite real")
        if not all(math.isfinite(v) and abs(v) < 1.0 for v in lam):
            raise ConfigError("every lambda entry must satisfy |lambda| < 1")
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "lam", lam)

    @property
    def rounds(self) -> int:
        return len(self.omega)


@dataclass(frozen=True)
class SystemConfig:
    """Three-hop HARQ-IR setup: source-destination, source-relay,
    relay-destination links plus protocol parameters."""

    sd: LinkModel
    sr: LinkModel
    rd: LinkModel
    max_rounds: int
    rate: float
    snr_db: float

    def __post_init__(self):
        if not (isinstance(self.max_rounds, (int, np.integer)) and self.max_rounds >= 1):
            raise ConfigError(f"max_rounds must be a positive integer, got {self.max_rounds!r}")
        for name in ("sd", "sr", "rd"):
            link = getattr(self, name)
            if not isinstance(link, LinkModel):
                raise ConfigError(f"{name} must be a LinkModel")
            if link.rounds < self.max_rounds:
                raise ConfigError(
                    f"link {name} lists {link.rounds} rounds but max_rounds={self.max_rounds}"
                )
        if not (isinstance(self.rate, (int, float)) and math.isfinite(self.rate) and self.rate > 0):
            raise ConfigError(f"rate must be a positive real, got {self.rate!r}")
        if not (isinstance(self.snr_db, (int, float)) and math.isfinite(self.snr_db)):
            raise ConfigError(f"snr_db must be a finite real, got {self.snr_db!r}")
        object.__setattr__(self, "max_rounds", int(self.max_rounds))
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "snr_db", float(self.snr_db))

    @property
    def snr_scale(self) -> float:
        """gamma_T on a linear scale."""
        return 10.0 ** (self.snr_db / 10.0)

    def link(self, name: str) -> LinkModel:
        if name not in ("sd", "sr", "rd"):
            raise ConfigError(f"unknown link name {name!r}")
        return getattr(self, name)


def constant_correlation(rho: float, M: int, m: float, omega: float) -> LinkModel:
    """LinkModel with every pairwise SNR correlation equal to rho.

    Inverting rho = lambda^4 leaves the sign of lambda free; the
    non-negative root is taken.
    """
    if not (isinstance(rho, (int, float)) and 0.0 <= rho < 1.0):
        raise ConfigError(f"rho must lie in [0, 1), got {rho!r}")
    if not (isinstance(M, (int, np.integer)) and M >= 1):
        raise ConfigError(f"M must be a positive integer, got {M!r}")
    lam = float(rho) ** 0.25
    return LinkModel(m=m, omega=(float(omega),) * int(M), lam=(lam,) * int(M))


def cross_correlation(link: LinkModel, l: int, k: int) -> float:
    """Correlation coefficient of (gamma_l, gamma_k); rounds are 1-based."""
    M = link.rounds
    if not (1 <= l <= M and 1 <= k <= M):
        raise ConfigError(f"round indices must lie in [1, {M}], got l={l}, k={k}")
    if l == k:
        raise ConfigError("cross correlation needs two distinct rounds")
    return link.lam[l - 1] ** 2 * link.lam[k - 1] ** 2


def joint_pdf(link: LinkModel, snr_scale: float, point, quad: QuadratureRule | None = None) -> float:
    """Joint density of (gamma_1 .. gamma_M) at `point`, by quadrature over
    the shared mixing variable.  Validation-only: the analytical pipeline
    never integrates this in more than one dimension.
    """
    point = np.atleast_1d(np.asarray(point, dtype=float))
    M = point.size
    if M == 0 or M > link.rounds:
        raise ConfigError(f"point must list between 1 and {link.rounds} coordinates")
    if not np.all(np.isfinite(point)) or not np.all(point > 0):
        raise ConfigError("all point entries must be positive reals")
    if not (math.isfinite(snr_scale) and snr_scale > 0):
        raise ConfigError(f"snr_scale must be a positive real, got {snr_scale!r}")
    m = link.m
    lam = np.asarray(link.lam[:M])
    omp = np.asarray(link.omega[:M]) * snr_scale
    if np.all(lam == 0.0):
        lp = np.sum((m - 1) * np.log(point * m / omp) - point * m / omp - gammaln(m) + np.log(m / omp))
        return float(np.exp(lp))
    rule = quad if quad is not None else gauss_laguerre(32)
    theta = lam**2 / (1 - lam**2)
    s = omp * (1 - lam**2) / m
    A = 1.0 + theta.sum()
    t = rule.nodes / A  # absorbs e^{-t(1+sum theta)} into the rule weight
    base = float(
        np.sum((m - 1) * np.log(point / s) - point / s - np.log(s) - gammaln(m)) - gammaln(m) - math.log(A)
    )
    acc = (m - 1) * np.log(t)
    for l in range(M):
        acc = acc + _log_hyp0f1_vec(m, theta[l] * t * point[l] / s[l])
    return float(math.exp(base + logsumexp(np.log(rule.weights) + acc)))


_LINK_KEYS = {"m", "omega", "rho", "lambda"}


def _link_from_table(name: str, table: dict, M: int) -> LinkModel:
    if not isinstance(table, dict):
        raise ConfigError(f"section [{name}] must be a table")
    unknown = set(table) - _LINK_KEYS
    if unknown:
        raise ConfigError(f"unknown keys in [{name}]: {sorted(unknown)}")
    if "m" not in table:
        raise ConfigError(f"missing key {name}.m")
    if "omega" not in table:
        raise ConfigError(f"missing key {name}.omega")
    omega = table["omega"]
    if isinstance(omega, (int, float)):
        omega = [float(omega)] * M
    if "rho" in table and "lambda" in table:
        raise ConfigError(f"[{name}] must give either rho or lambda, not both")
    if "lambda" in table:
        lam = table["lambda"]
        if not isinstance(lam, list):
            raise ConfigError(f"{name}.lambda must be a list")
    elif "rho" in table:
        rho = table["rho"]
        if not (isinstance(rho, (int, float)) and 0.0 <= rho < 1.0):
            raise ConfigError(f"{name}.rho must lie in [0, 1), got {rho!r}")
        lam = [float(rho) ** 0.25] * len(omega)
    else:
        raise ConfigError(f"[{name}] needs either rho or lambda")
    try:
        return LinkModel(m=table["m"], omega=tuple(omega), lam=tuple(lam))
    except ConfigError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def load_config(source) -> SystemConfig:
    """Parse a SystemConfig from a TOML file path or a TOML string."""
    if hasattr(source, "read_text"):
        text = source.read_text()
    elif isinstance(source, str) and "\n" not in source and source.endswith(".toml"):
        with open(source, "rb") as fh:
            return load_config(fh.read().decode())
    else:
        text = source
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config is not valid TOML: {exc}") from exc
    for key in ("max_rounds", "rate", "snr_db"):
        if key not in data:
            raise ConfigError(f"missing top-level key {key!r}")
    unknown = set(data) - {"max_rounds", "rate", "snr_db", "sd", "sr", "rd"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    M = data["max_rounds"]
    if not isinstance(M, int) or M < 1:
        raise ConfigError(f"max_rounds must be a positive integer, got {M!r}")
    links = {}
    for name in ("sd", "sr", "rd"):
        if name not in data:
            raise ConfigError(f"missing section [{name}]")
        links[name] = _link_from_table(name, data[name], M)
    return SystemConfig(
        sd=links["sd"],
        sr=links["sr"],
        rd=links["rd"],
        max_rounds=M,
        rate=data["rate"],
        snr_db=data["snr_db"],
    )


def dump_config(cfg: SystemConfig) -> str:
    """Serialize a SystemConfig back to its TOML schema (lambda-list form)."""
    lines = [
        f"max_rounds = {cfg.max_rounds}",
        f"rate = {cfg.rate!r}",
        f"snr_db = {cfg.snr_db!r}",
    ]
    for name in ("sd", "sr", "rd"):
        link = cfg.link(name)
        lines.append(f"\n[{name}]")
        lines.append(f"m = {link.m!r}")
        lines.append("omega = [" + ", ".join(repr(v) for v in link.omega) + "]")
        lines.append("lambda = [" + ", ".join(repr(v) for v in link.lam) + "]")
    return "\n".join(lines) + "\n"
