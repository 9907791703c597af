"""Stability rates for X_n -> X when sigma_n -> sigma uniformly.

Three pieces live here:

* the Yamada-Watanabe test function phi, a C^1 approximation of |x| whose
  second derivative is 1/(c * rho(|x|)) on the annulus a < |x| < b with
  rho(u) = u**(2H);
* the theoretical upper bounds for the Hoelder regimes (H = 1/2 logarithmic,
  H in (1/2, 1] power law) and the generalised Nakao-Le Gall regimes with a
  positive shift eps, with the explicit constants C1..C4;
* an experiment harness that measures Delta_n, runs coupled Monte Carlo and
  fits the empirical decay.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .coefficients import DiffusionSpec, default_grid, sup_distance
from .errors import DataError, DomainError, ParameterError
from .simulate import MCEstimate, SimConfig, Statistic, coupled_batch, estimate


class RateWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------- Yamada-Watanabe function
def _pow_integral(p: float, a: float, u):
    """int_a^u z**(p-1) dz = a**p * expm1(p log(u/a)) / p, stable as p -> 0."""
    L = np.log(np.asarray(u, dtype=float) / a)
    if p == 0.0:
        return L
    return a**p * np.expm1(p * L) / p


@dataclass(frozen=True)
class YWFunction:
    two_h: float
    a: float
    b: float
    c_norm: float

    @property
    def H(self) -> float:
        return 0.5 * self.two_h

    def _R(self, u):
        return _pow_integral(1.0 - self.two_h, self.a, u)

    def _Phi(self, u):
        # int_a^u R(y) dy = u R(u) - int_a^u z**(1-2H) dz
        return u * self._R(u) - _pow_integral(2.0 - self.two_h, self.a, u)

    def phi(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        inner = np.clip(ax, self.a, self.b)
        out = self._Phi(inner) / self.c_norm
        out = np.where(ax > self.b, self._Phi(self.b) / self.c_norm + (ax - self.b), out)
        return np.where(ax <= self.a, 0.0, out)

    def dphi(self, x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        g = self._R(np.clip(ax, self.a, self.b)) / self.c_norm
        g = np.where(ax >= self.b, 1.0, g)
        return np.where(ax <= self.a, 0.0, np.sign(x) * g)

    def d2phi(self, x):
        ax = np.abs(np.asarray(x, dtype=float))
        inside = (ax > self.a) & (ax < self.b)
        with np.errstate(divide="ignore"):
            val = 1.0 / (self.c_norm * ax**self.two_h)
        return np.where(inside, val, 0.0)

    __call__ = phi


def yw_build(H: float, a: float, b: float) -> YWFunction:
    """phi for rho(u) = u**(2H); c_norm = int_a^b dy / rho(y) in closed form."""
    if not 0.5 <= H <= 1.0:
        raise ParameterError("H must lie in [1/2, 1]")
    if not (0.0 < a < b <= 1.0):
        raise ParameterError("need 0 < a < b <= 1")
    two_h = 2.0 * H
    c = float(_pow_integral(1.0 - two_h, a, b))
    return YWFunction(two_h, float(a), float(b), c)


def yw_paper_choice(H: float, delta: float) -> YWFunction:
    """The proof's choice a = delta**(1/H), with b = sqrt(a) at H = 1/2 and b = 2a above."""
    a = delta ** (1.0 / H)
    b = math.sqrt(a) if H == 0.5 else 2.0 * a
    return yw_build(H, a, b)


@dataclass
class SandwichReport:
    samples: int
    sandwich_violations: int
    max_abs_dphi: float
    max_rel_d2_error: float

    @property
    def ok(self) -> bool:
        return self.sandwich_violations == 0 and self.max_abs_dphi <= 1.0


def yw_sandwich_check(f: YWFunction, samples: int = 10_000, seed: int = 0, rel_step: float = 1e-6) -> SandwichReport:
    """Check |x| - b <= phi <= |x|, |phi'| <= 1 and phi'' against a central difference of phi'.

    The finite difference uses step ``rel_step * |x|`` and only points whose
    stencil stays inside the open annulus.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    third = max(1, samples // 3)
    x = np.concatenate([
        rng.uniform(-3 * f.b, 3 * f.b, third),
        np.exp(rng.uniform(math.log(f.a), math.log(f.b), third)) * rng.choice([-1, 1], third),
        rng.uniform(-f.a, f.a, samples - 2 * third),
        [2 * f.b, -2 * f.b, f.a, f.b],
    ])
    ax = np.abs(x)
    phi = f.phi(x)
    slack = 4 * np.finfo(float).eps * np.maximum(ax, f.b)
    bad = (phi > ax + slack) | (phi < ax - f.b - slack)
    max_dphi = float(np.max(np.abs(f.dphi(x))))

    u = ax[(ax > f.a) & (ax < f.b)]
    step = rel_step * u
    u = u[(u - step > f.a) & (u + step < f.b)]
    step = rel_step * u
    fd = (f.dphi(u + step) - f.dphi(u - step)) / (2 * step)
    exact = f.d2phi(u)
    rel = float(np.max(np.abs(fd / exact - 1.0))) if u.size else 0.0
    return SandwichReport(x.size, int(np.count_nonzero(bad)), max_dphi, rel)


# ---------------------------------------------------------------------- theoretical bounds
class Regime(str, enum.Enum):
    HOLDER_HALF = "holder_half"
    HOLDER_ABOVE = "holder_above"
    NLG_ZERO = "nlg_zero"
    NLG_POSITIVE = "nlg_positive"


@dataclass(frozen=True)
class TheoreticalBound:
    """Upper bound on E[(sup_{t<=T} |X - X_n|)^2] as a function of Delta.

    ``constant`` is assembled from the explicit majorants of C2 (Hoelder) or
    C4 (Nakao-Le Gall); it is an upper bound on the true constant, not an
    estimate of it.
    """

    regime: Regime
    constant: float
    H: float
    epsilon: float = 0.0

    @property
    def log_form(self) -> bool:
        return self.regime in (Regime.HOLDER_HALF, Regime.NLG_ZERO)

    @property
    def exponent(self) -> float | None:
        if self.regime is Regime.HOLDER_ABOVE:
            return 1.0 - 1.0 / (2.0 * self.H)
        if self.regime is Regime.NLG_POSITIVE:
            return 1.0 - 1.0 / (self.H + 1.0)
        return None

    @property
    def threshold(self) -> float:
        """Delta must be strictly below this for the bound to apply."""
        if self.regime in (Regime.HOLDER_HALF, Regime.HOLDER_ABOVE):
            return 2.0 ** (-self.H)
        return 2.0 ** (-0.5 * (self.H + 1.0))

    def shape(self, delta):
        """The Delta-dependence without constants: (-log D)^(-1/2) or D^exponent."""
        d = np.asarray(delta, dtype=float)
        if np.any(d < 0) or np.any(d >= self.threshold):
            raise DomainError(f"Delta must lie in [0, {self.threshold:.6g})")
        if self.log_form:
            with np.errstate(divide="ignore"):
                return np.where(d > 0, (-np.log(np.where(d > 0, d, 0.5))) ** -0.5, 0.0)
        return d**self.exponent

    def __call__(self, delta):
        scale = self.constant
        if self.regime in (Regime.NLG_ZERO, Regime.NLG_POSITIVE):
            scale = self.constant * self.epsilon**-3
        out = scale * self.shape(delta)
        return float(out) if np.ndim(out) == 0 else out


def holder_constants(T: float, c_H: float, sigma_sup: float) -> tuple[float, float]:
    """(C1, C2) majorants for the Hoelder regimes at horizon T."""
    c1 = 2.0 / math.log(2.0) * (1.0 + T * c_H**2 + T)
    c2 = 4.0 * (2.0 * c_H**2 + 4.0 * sigma_sup**2 + 2.0) * T * math.sqrt(c1)
    return c1, c2


def nlg_constants(T: float, sigma_sup: float, sigma_n_sup: float, f_sup: float) -> tuple[float, float, float]:
    """(c_L, C3, C4) majorants for the Nakao-Le Gall regimes at horizon T."""
    c_l = 2.0 * (sigma_sup + sigma_n_sup) * f_sup
    c3 = 2.0 / math.log(2.0) * (1.0 + math.sqrt(T) * c_l + T)
    c4 = 4.0 * (c_l * math.sqrt(T) + 4.0 * f_sup**2 * T + 2.0 * T) * math.sqrt(c3)
    return c_l, c3, c4


def theoretical_bound(
    regime: Regime | str,
    T: float,
    H: float | None = None,
    c_H: float = 1.0,
    sigma_sup: float = 1.0,
    sigma_n_sup: float | None = None,
    f_sup: float = 1.0,
    epsilon: float = 0.0,
) -> TheoreticalBound:
    regime = Regime(regime)
    if not T > 0:
        raise ParameterError("T must be positive")
    if regime is Regime.HOLDER_HALF:
        H = 0.5
    elif regime is Regime.NLG_ZERO:
        H = 0.0
    elif H is None:
        raise ParameterError(f"{regime.value} needs H")
    if regime is Regime.HOLDER_ABOVE and not 0.5 < H <= 1.0:
        raise ParameterError("holder_above needs H in (1/2, 1]")
    if regime is Regime.NLG_POSITIVE and not 0.0 < H <= 1.0:
        raise ParameterError("nlg_positive needs H in (0, 1]")
    if regime in (Regime.HOLDER_HALF, Regime.HOLDER_ABOVE):
        _, const = holder_constants(T, c_H, sigma_sup)
        return TheoreticalBound(regime, const, float(H))
    if not 0.0 < epsilon < 1.0:
        raise ParameterError("Nakao-Le Gall regimes need epsilon in (0, 1)")
    _, _, const = nlg_constants(T, sigma_sup, sigma_sup if sigma_n_sup is None else sigma_n_sup, f_sup)
    return TheoreticalBound(regime, const, float(H), float(epsilon))


# ---------------------------------------------------------------------- fitting
@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    slope_stderr: float
    max_rel_residual: float
    log_regime: bool


def fit_rate(deltas, errors, log_regime: bool = False) -> RateFit:
    """Fit error against Delta.

    Power regimes: ordinary least squares of log(error) on log(Delta); ``slope``
    is the empirical order. Log regimes: error = K * (-log Delta)^(-1/2) through
    the origin; ``slope`` is K and ``intercept`` is 0.
    """
    d = np.asarray(deltas, dtype=float)
    e = np.asarray(errors, dtype=float)
    if d.shape != e.shape or d.size < 3:
        raise DataError("need at least 3 (delta, error) pairs")
    if np.any(d <= 0) or np.any(e <= 0) or not np.all(np.isfinite(e)):
        raise DataError("deltas and errors must be positive and finite")
    if np.unique(d).size != d.size:
        raise DataError("deltas must be distinct")
    m = d.size
    if log_regime:
        if np.any(d >= 1):
            raise DataError("log regime needs Delta < 1")
        g = (-np.log(d)) ** -0.5
        k = float(g @ e / (g @ g))
        resid = e - k * g
        se = math.sqrt(float(resid @ resid) / (m - 1) / float(g @ g))
        return RateFit(k, 0.0, se, float(np.max(np.abs(e / (k * g) - 1.0))), True)
    x, y = np.log(d), np.log(e)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    se = math.sqrt(float(resid @ resid) / (m - 2) / sxx) if m > 2 else math.nan
    return RateFit(slope, intercept, se, float(np.max(np.abs(np.expm1(resid)))), False)


# ---------------------------------------------------------------------- experiments
@dataclass(frozen=True)
class FamilyMember:
    n: int
    sigma: DiffusionSpec
    sigma_n: DiffusionSpec


def cantor_family(lam: float, ns, base: str = "zero", shift: float = 0.0) -> list[FamilyMember]:
    """Exact extended Cantor coefficient against its iterates, all shifted by ``shift``."""
    sigma = DiffusionSpec.cantor(lam, None, base, shift)
    return [FamilyMember(int(n), sigma, DiffusionSpec.cantor(lam, int(n), base, shift)) for n in ns]


def shift_family(sigma: DiffusionSpec, ns, ratio: float = 2.0) -> list[FamilyMember]:
    """sigma_n = sigma + ratio**-n."""
    return [FamilyMember(int(n), sigma, sigma.with_shift(sigma.shift + ratio ** -int(n))) for n in ns]


def steps_for_rule(T: float, min_delta: float, factor: float = 10.0) -> int:
    """Smallest step count with sqrt(T/steps) < min_delta / factor."""
    steps = max(1, math.floor(T / (min_delta / factor) ** 2))
    while math.sqrt(T / steps) >= min_delta / factor:
        steps += 1
    return steps


@dataclass(frozen=True)
class RatePoint:
    n: int
    delta: float
    error: float
    stderr: float
    bound: float


@dataclass
class RateExperimentResult:
    points: list[RatePoint]
    fitted_slope: float
    slope_stderr: float
    intercept: float
    regime: Regime
    statistic: Statistic
    bound: TheoreticalBound
    fit: RateFit
    secondary: dict = field(default_factory=dict)  # statistic -> list[MCEstimate]
    excluded: list = field(default_factory=list)
    rule_satisfied: bool = True

    @property
    def deltas(self) -> np.ndarray:
        return np.array([p.delta for p in self.points])

    @property
    def errors(self) -> np.ndarray:
        return np.array([p.error for p in self.points])

    def nonincreasing(self, tol_se: float = 2.0, estimates: list[MCEstimate] | None = None) -> bool:
        """Errors nonincreasing in n up to ``tol_se`` pooled standard errors."""
        if estimates is None:
            pairs = [(p.error, p.stderr) for p in self.points]
        else:
            pairs = [(e.mean, e.std_error) for e in estimates]
        for (e0, s0), (e1, s1) in zip(pairs, pairs[1:]):
            if e1 > e0 + tol_se * math.hypot(s0, s1):
                return False
        return True

    def secondary_fit(self, statistic: Statistic) -> RateFit:
        ests = self.secondary[Statistic(statistic)]
        return fit_rate(self.deltas, [e.mean for e in ests], self.bound.log_form)

    def summary(self, tolerance: float = 0.1) -> dict:
        exponent = self.bound.exponent
        if exponent is None:
            passed = self.fitted_slope > 0 and self.fit.max_rel_residual < 0.2
        else:
            passed = self.fitted_slope >= exponent - tolerance
        return {
            "slope": self.fitted_slope,
            "slope_stderr": self.slope_stderr,
            "regime": self.regime.value,
            "statistic": self.statistic.value,
            "theoretical_exponent": exponent,
            "max_rel_residual": self.fit.max_rel_residual,
            "nonincreasing": self.nonincreasing(),
            "step_rule_satisfied": self.rule_satisfied,
            "excluded_n": list(self.excluded),
            "pass": bool(passed),
        }


def run_rate_experiment(
    family: list[FamilyMember],
    cfg: SimConfig,
    bound: TheoreticalBound,
    statistic: Statistic = Statistic.MEAN_SUP_SQUARED,
    grid=None,
) -> RateExperimentResult:
    """Measure Delta_n, simulate every member on shared increments and fit the decay.

    Members whose Delta_n is not below the regime's validity threshold are
    dropped with a warning. The empirical error is not compared with the bound
    value itself: the constants are majorants, so only the order is meaningful.
    """
    if not family:
        raise ParameterError("empty family")
    statistic = Statistic(statistic)
    members = sorted(family, key=lambda m: m.n)
    deltas = []
    for m in members:
        g = grid if grid is not None else default_grid(m.sigma, m.sigma_n)
        deltas.append(sup_distance(m.sigma, m.sigma_n, g))
    keep, excluded = [], []
    for m, d in zip(members, deltas):
        if d < bound.threshold:
            keep.append((m, d))
        else:
            excluded.append(m.n)
    if excluded:
        warnings.warn(f"n={excluded} excluded: Delta_n >= {bound.threshold:.4g}", RateWarning, stacklevel=2)
    if not keep:
        raise DataError("no family member satisfies the Delta threshold")
    positive = [d for _, d in keep if d > 0]
    rule_ok = bool(positive) and math.sqrt(cfg.h) < min(positive) / 10.0
    if positive and not rule_ok:
        warnings.warn(
            f"sqrt(h)={math.sqrt(cfg.h):.3g} is not 10x below min Delta_n={min(positive):.3g}; "
            "discretisation error may dominate",
            RateWarning,
            stacklevel=2,
        )

    # members sharing the reference coefficient reuse one X path
    groups: dict = {}
    for i, (m, _) in enumerate(keep):
        key = id(m.sigma) if m.sigma.kind == "custom" and m.sigma.fn is not None else repr(m.sigma.to_json())
        groups.setdefault(key, []).append(i)
    per_stat = {s: [None] * len(keep) for s in Statistic}
    for idx in groups.values():
        batch = coupled_batch(keep[idx[0]][0].sigma, [keep[i][0].sigma_n for i in idx], cfg)
        for j, i in enumerate(idx):
            for s in Statistic:
                per_stat[s][i] = estimate(batch.statistic(s, j), s)

    main = per_stat[statistic]
    points = [
        RatePoint(m.n, d, e.mean, e.std_error, float(bound(d)))
        for (m, d), e in zip(keep, main)
    ]
    fit = fit_rate([p.delta for p in points], [p.error for p in points], bound.log_form)
    secondary = {s: v for s, v in per_stat.items() if s is not statistic}
    return RateExperimentResult(
        points, fit.slope, fit.slope_stderr, fit.intercept, bound.regime, statistic, bound, fit,
        secondary, excluded, rule_ok,
    )
