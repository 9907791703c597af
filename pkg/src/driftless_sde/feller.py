"""Feller test at the boundary 0 for driftless diffusions on (0, inf).

With identity scale function the test integrals are

    mu(x) = int_x^c (c - y) / sigma(y)^2 dy,    nu(x) = int_x^c (y - x) / sigma(y)^2 dy,

and the boundary is natural (both limits infinite), exit-not-entrance
(nu finite, mu infinite) or nonsingular (both finite). A finite mu together with
an infinite nu cannot happen; it is reported as ``InconsistentCase``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import DiffusionSpec
from .errors import ConfigError, ParameterError, SingularIntegrandError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


class Classification(str, enum.Enum):
    NATURAL = "Natural"
    EXIT_NOT_ENTRANCE = "ExitNotEntrance"
    NON_SINGULAR = "NonSingular"
    INCONSISTENT = "InconsistentCase"


@dataclass(frozen=True)
class Limit:
    """Limit of a partial integral as x -> 0+; ``value`` is None when divergent."""

    value: float | None

    @property
    def divergent(self) -> bool:
        return self.value is None

    def to_json(self):
        return {"divergent": True} if self.divergent else {"divergent": False, "value": self.value}


@dataclass(frozen=True)
class FellerConfig:
    c: float = 0.5
    x_grid: tuple = None  # default c * 2**-k, k = 1..60
    divergence_cap: float = 1e8
    slope_threshold: float = 0.1
    tail_points: int = 10

    def __post_init__(self):
        if not (self.c > 0 and math.isfinite(self.c)):
            raise ConfigError("c must be a positive finite number")
        if self.x_grid is None:
            object.__setattr__(self, "x_grid", tuple(self.c * 2.0 ** -np.arange(1, 61)))
        xs = np.asarray(self.x_grid, dtype=float)
        if xs.size < 8:
            raise ConfigError("x_grid needs at least 8 points")
        if np.any(np.diff(xs) >= 0) or xs[0] >= self.c or xs[-1] <= 0:
            raise ConfigError("x_grid must decrease strictly inside (0, c)")


@dataclass
class BoundaryReport:
    mu_limit: Limit
    nu_limit: Limit
    classification: Classification
    pathwise_uniqueness: bool | None
    monotone_declared: bool
    sigma_zero_is_zero: bool
    c: float
    diagnostics: np.ndarray = field(repr=False)  # columns x, mu, nu

    def to_json(self) -> dict:
        return {
            "c": self.c,
            "mu_limit": self.mu_limit.to_json(),
            "nu_limit": self.nu_limit.to_json(),
            "classification": self.classification.value,
            "pathwise_uniqueness": self.pathwise_uniqueness,
            "monotone_declared": self.monotone_declared,
            "sigma_zero_is_zero": self.sigma_zero_is_zero,
        }


def _cells(lo: float, hi: float, ratio: float = 2.0) -> np.ndarray:
    """Cell edges refined geometrically toward ``lo``."""
    edges = [lo]
    e = lo
    while e * ratio < hi:
        e *= ratio
        edges.append(e)
    edges.append(hi)
    return np.array(edges)


def _integrate(sigma: DiffusionSpec, weight, lo: float, hi: float) -> float:
    if hi <= lo:
        return 0.0
    edges = _cells(lo, hi)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    y = (a + b) * 0.5 + half * _GL_NODES[None, :]
    s = np.asarray(sigma(y.ravel())).reshape(y.shape)
    zero = s == 0.0
    if zero.any():
        raise SingularIntegrandError(float(y[zero][0]))
    vals = weight(y) / (s * s)
    return float(np.sum(half[:, 0] * (vals @ _GL_WEIGHTS)))


def _check_limits(c: float, x: float):
    if not c > 0:
        raise ParameterError("c must be positive")
    if not 0 < x <= c:
        raise ParameterError("need 0 < x <= c")


def mu_integral(sigma: DiffusionSpec, c: float, x: float) -> float:
    """int_x^c (c - y) / sigma(y)^2 dy by Gauss-Legendre(16) on dyadic cells toward x."""
    _check_limits(c, x)
    return _integrate(sigma, lambda y: c - y, x, c)


def nu_integral(sigma: DiffusionSpec, c: float, x: float) -> float:
    """int_x^c (y - x) / sigma(y)^2 dy."""
    _check_limits(c, x)
    return _integrate(sigma, lambda y: y - x, x, c)


def inverse_square_integral(sigma: DiffusionSpec, c: float, x: float) -> float:
    """int_x^c sigma(y)^-2 dy, the common majorant of mu and nu (up to 2c)."""
    _check_limits(c, x)
    return _integrate(sigma, lambda y: np.ones_like(y), x, c)


def _aitken(v: np.ndarray) -> float:
    a, b, c = v[-3:]
    denom = (c - b) - (b - a)
    if denom == 0.0 or not math.isfinite(denom):
        return float(c)
    est = c - (c - b) ** 2 / denom
    # the extrapolation must not move against the monotone trend
    return float(est) if est >= c else float(c)


def _limit(xs: np.ndarray, values: np.ndarray, cfg: FellerConfig) -> Limit:
    if np.any(values > cfg.divergence_cap) or not np.all(np.isfinite(values)):
        return Limit(None)
    tail = slice(-cfg.tail_points, None)
    slope = np.polyfit(np.log(1.0 / xs[tail]), values[tail], 1)[0]
    if slope > cfg.slope_threshold:
        return Limit(None)
    return Limit(_aitken(values))


def classify_boundary(
    sigma: DiffusionSpec,
    cfg: FellerConfig | None = None,
    monotone_declared: bool = False,
    sigma_zero_is_zero: bool = False,
) -> BoundaryReport:
    """Classify the boundary 0 and, when hypotheses are declared, decide pathwise uniqueness.

    Uniqueness is reported True when sigma is declared monotone and mu(0+) is
    infinite (sufficient direction), False when in addition sigma(0) = 0 is
    declared and mu(0+) is finite (necessary direction), and None otherwise.
    """
    cfg = cfg or FellerConfig()
    xs = np.asarray(cfg.x_grid, dtype=float)
    c = cfg.c
    mu = np.empty_like(xs)
    nu = np.empty_like(xs)
    for i, x in enumerate(xs):
        mu[i] = mu_integral(sigma, c, x)
        nu[i] = nu_integral(sigma, c, x)
        if mu[i] > cfg.divergence_cap and nu[i] > cfg.divergence_cap:
            mu, nu, xs = mu[: i + 1], nu[: i + 1], xs[: i + 1]
            break
    mu_lim = _limit(xs, mu, cfg)
    nu_lim = _limit(xs, nu, cfg)
    if mu_lim.divergent and nu_lim.divergent:
        cls = Classification.NATURAL
    elif mu_lim.divergent:
        cls = Classification.EXIT_NOT_ENTRANCE
    elif nu_lim.divergent:
        cls = Classification.INCONSISTENT
    else:
        cls = Classification.NON_SINGULAR
    uniqueness = None
    if monotone_declared:
        if mu_lim.divergent:
            uniqueness = True
        elif sigma_zero_is_zero:
            uniqueness = False
    diag = np.column_stack([xs, mu, nu])
    return BoundaryReport(mu_lim, nu_lim, cls, uniqueness, monotone_declared, sigma_zero_is_zero, c, diag)
