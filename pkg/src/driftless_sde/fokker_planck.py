"""Monte Carlo view of the forward equation d/dt v = (1/2) d^2/dx^2 (sigma^2 v).

The law of X(t) is estimated by a Gaussian kernel density on the surviving
paths (in log space by default, or reflected at 0), with the absorbed mass
reported as a separate atom. The
equation itself is checked in weak form through Ito's formula,

    d/dt E phi(X_t) = E[ sigma(X_t)^2 phi''(X_t) / 2 ],

with smooth compactly supported bump functions phi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .coefficients import DiffusionSpec
from .errors import ConfigError, ParameterError
from .simulate import SimConfig, simulate_at

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _step_index(cfg: SimConfig, t: float) -> int:
    k = round(t / cfg.h)
    if k < 0 or abs(k * cfg.h - t) > 1e-9 * max(t, cfg.h):
        raise ConfigError(f"t={t} is not a multiple of the step h={cfg.h}")
    return int(k)


def _truncate(cfg: SimConfig, last_step: int) -> SimConfig:
    # the Philox stream of a path is prefix-stable, so simulating fewer steps
    # with the same h reproduces the first part of the full-horizon path
    return replace(cfg, T=last_step * cfg.h, steps=last_step)


# ---------------------------------------------------------------------- density
@dataclass
class DensityEstimate:
    t: float
    x0: float
    grid: np.ndarray
    values: np.ndarray
    atom_at_zero: float
    bandwidth: float
    paths: int
    method: str = "log"

    def mass(self) -> float:
        """atom + trapezoid integral of the density over the grid."""
        if self.grid.size < 2:
            return self.atom_at_zero
        return self.atom_at_zero + float(np.trapezoid(self.values, self.grid))


def silverman_bandwidth(samples: np.ndarray) -> float:
    n = samples.size
    if n < 2:
        return 0.0
    sd = float(np.std(samples, ddof=1))
    q75, q25 = np.percentile(samples, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * n ** -0.2


def _kde(samples: np.ndarray, grid: np.ndarray, bw: float, total: int, reflect: bool) -> np.ndarray:
    """Gaussian KDE normalised by ``total`` (so absorbed paths carry no density)."""
    s = np.sort(samples)
    if reflect:
        s = np.sort(np.concatenate([s, -s]))
    out = np.empty(grid.size)
    cut = 8.0 * bw
    lo = np.searchsorted(s, grid - cut)
    hi = np.searchsorted(s, grid + cut)
    for i, y in enumerate(grid):
        z = (y - s[lo[i]:hi[i]]) / bw
        out[i] = np.exp(-0.5 * z * z).sum()
    return out / (total * bw * _SQRT_2PI)


def density_estimate(
    sigma: DiffusionSpec,
    cfg: SimConfig,
    t: float,
    grid=None,
    bandwidth: float | None = None,
    method: str = "log",
) -> DensityEstimate:
    """Density of X(t) on (0, inf) plus the atom at 0 from absorbed paths.

    ``method="log"`` smooths log X with Silverman's rule and maps back with the
    Jacobian 1/y; this keeps all mass on (0, inf) and adapts the width to the
    skewed shape typical of these laws. ``method="reflect"`` smooths X itself,
    reflected at 0. In both cases the bandwidth is floored at twice the grid
    spacing (measured in log units at the sample median for the log method).
    Survivors at or below 0 force the linear method without reflection.
    """
    if not 0 < t <= cfg.T * (1 + 1e-12):
        raise ParameterError("need 0 < t <= T")
    if method not in ("log", "reflect"):
        raise ParameterError("method must be 'log' or 'reflect'")
    k = _step_index(cfg, t)
    values, _ = simulate_at(sigma, _truncate(cfg, k), [k])
    x = values[:, 0]
    dead = (x <= 0.0) if cfg.absorbs(sigma) else np.zeros(x.size, dtype=bool)
    alive = x[~dead]
    atom = float(np.count_nonzero(dead)) / x.size
    positive = alive.size == 0 or bool(alive.min() > 0.0)
    if not positive:
        method = "linear"
    reflect = method == "reflect"

    if grid is None:
        top = float(alive.max()) if alive.size else cfg.x0
        pad = 5 * max(silverman_bandwidth(alive), 1e-3 * cfg.x0)
        lo = 0.0 if positive else float(alive.min()) - pad
        grid = np.linspace(lo, top + pad, 2001)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ConfigError("grid must be a non-empty 1-d array")
    spacing = float(np.min(np.diff(grid))) if grid.size > 1 else 0.0

    samples = np.log(alive) if method == "log" else alive
    if method == "log" and alive.size:
        spacing /= float(np.median(alive))
    if bandwidth is None:
        bw = max(silverman_bandwidth(samples), 2.0 * spacing)
        if not bw > 0:
            bw = 1e-3 if method == "log" else 1e-3 * cfg.x0
    else:
        if not bandwidth > 0:
            raise ParameterError("bandwidth must be positive")
        bw = float(bandwidth)

    dens = np.zeros(grid.size)
    if alive.size:
        if method == "log":
            pos = grid > 0
            dens[pos] = _kde(samples, np.log(grid[pos]), bw, x.size, False) / grid[pos]
        else:
            dens = _kde(samples, grid, bw, x.size, reflect)
    return DensityEstimate(float(t), cfg.x0, grid, dens, atom, bw, x.size, method)


# ---------------------------------------------------------------------- weak form
@dataclass(frozen=True)
class TestFunction:
    """A C^2 test function with its second derivative and its support."""

    name: str
    f: Callable[[np.ndarray], np.ndarray]
    d2: Callable[[np.ndarray], np.ndarray]
    support: tuple[float, float]

    __test__ = False  # keep pytest from collecting the class

    @classmethod
    def bump(cls, center: float, radius: float) -> "TestFunction":
        """exp(-1 / (1 - u^2)) with u = (x - center) / radius, zero outside |u| < 1."""
        if not radius > 0:
            raise ParameterError("radius must be positive")

        def f(x):
            u = (np.asarray(x, dtype=float) - center) / radius
            inside = np.abs(u) < 1.0
            w = np.where(inside, 1.0 - u * u, 1.0)
            return np.where(inside, np.exp(-1.0 / w), 0.0)

        def d2(x):
            u = (np.asarray(x, dtype=float) - center) / radius
            inside = np.abs(u) < 1.0
            w = np.where(inside, 1.0 - u * u, 1.0)
            g = np.exp(-1.0 / w)
            return np.where(inside, g * (6.0 * u**4 - 2.0) / w**4 / radius**2, 0.0)

        return cls(f"bump({center:g},{radius:g})", f, d2, (center - radius, center + radius))

    @classmethod
    def constant(cls, value: float = 1.0) -> "TestFunction":
        return cls(
            f"constant({value:g})",
            lambda x: np.full(np.shape(x), float(value)),
            lambda x: np.zeros(np.shape(x)),
            (-math.inf, math.inf),
        )


def default_test_set(x0: float = 1.0) -> list[TestFunction]:
    """Three bumps around the starting point, supported in (0, inf)."""
    r = 0.4 * x0
    return [TestFunction.bump(c * x0, r) for c in (0.5, 1.0, 1.5)]


@dataclass
class WeakResidualReport:
    test_functions: list[str]
    residuals: list[float]
    stderrs: list[float]
    tolerances: list[float]
    tolerance: float
    passed: bool

    def to_json(self) -> dict:
        return {
            "test_functions": self.test_functions,
            "residuals": self.residuals,
            "stderrs": self.stderrs,
            "tolerances": self.tolerances,
            "tolerance": self.tolerance,
            "pass": self.passed,
        }


def weak_residual(
    sigma: DiffusionSpec,
    cfg: SimConfig,
    t: float,
    dt: float,
    test_set: list[TestFunction] | None = None,
    n_stderr: float = 5.0,
    floor: float = 1e-12,
) -> WeakResidualReport:
    """Per-path residual [phi(X_{t+dt}) - phi(X_{t-dt})]/(2 dt) - sigma(X_t)^2 phi''(X_t)/2.

    All three time points come from the same paths. A test function passes when
    |mean| <= max(n_stderr * stderr, floor); ``tolerance`` is the largest of these.
    """
    if not (dt > 0 and t - dt > 0):
        raise ParameterError("need dt > 0 and t - dt > 0")
    test_set = default_test_set(cfg.x0) if test_set is None else list(test_set)
    if not test_set:
        raise ConfigError("empty test set")
    for tf in test_set:
        if tf.support[0] >= tf.support[1]:
            raise ConfigError(f"test function {tf.name} has an empty support")
    k0, k1, k2 = (_step_index(cfg, s) for s in (t - dt, t, t + dt))
    if k2 > cfg.steps:
        raise ConfigError("t + dt exceeds the horizon T")
    values, _ = simulate_at(sigma, _truncate(cfg, k2), [k0, k1, k2])
    x_lo, x_mid, x_hi = values[:, 0], values[:, 1], values[:, 2]
    a_half = 0.5 * np.asarray(sigma(x_mid)) ** 2
    n = x_mid.size
    names, res, ses, tols = [], [], [], []
    for tf in test_set:
        r = (tf.f(x_hi) - tf.f(x_lo)) / (2.0 * dt) - a_half * tf.d2(x_mid)
        mean = float(np.mean(r))
        se = float(np.std(r, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        names.append(tf.name)
        res.append(mean)
        ses.append(se)
        tols.append(max(n_stderr * se, floor))
    passed = all(abs(r) <= tol for r, tol in zip(res, tols))
    return WeakResidualReport(names, res, ses, tols, max(tols), passed)


# ---------------------------------------------------------------------- v(t, x)
@dataclass
class SmoothSolution:
    t: float
    x: np.ndarray
    values: np.ndarray
    stderr: np.ndarray


def smooth_solution(
    sigma: DiffusionSpec,
    f: Callable[[np.ndarray], np.ndarray],
    t: float,
    x_grid,
    cfg: SimConfig,
    growth: tuple[float, float] | None = None,
) -> SmoothSolution:
    """v(t, x) = E f(X_t^x) for each starting point x, absorbed paths included at f(0).

    ``growth = (L, r)`` records the declared bound |f(y)| <= L (1 + |y|)^(2r);
    samples breaking it raise ParameterError.
    """
    if not t > 0:
        raise ParameterError("t must be positive")
    xs = np.asarray(x_grid, dtype=float).reshape(-1)
    k = _step_index(cfg, t)
    base = _truncate(cfg, k)
    vals, ses = np.empty(xs.size), np.empty(xs.size)
    for i, x in enumerate(xs):
        sample, _ = simulate_at(sigma, replace(base, x0=float(x)), [k])
        fy = np.asarray(f(sample[:, 0]), dtype=float)
        if growth is not None:
            L, r = growth
            if np.any(np.abs(fy) > L * (1.0 + np.abs(sample[:, 0])) ** (2 * r) * (1 + 1e-12)):
                raise ParameterError("f exceeds its declared polynomial growth bound")
        vals[i] = fy.mean()
        ses[i] = fy.std(ddof=1) / math.sqrt(fy.size) if fy.size > 1 else 0.0
    return SmoothSolution(float(t), xs, vals, ses)
