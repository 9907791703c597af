"""Diffusion coefficients for dX = sigma(X) dB.

A :class:`DiffusionSpec` is an immutable description of a coefficient: one of
the closed-form examples (power law, Girsanov, Tanaka, skew Brownian motion),
the extended middle-lambda Cantor function or one of its iterates, or a
user-supplied callable. Every spec carries an additive shift ``eps`` and is
evaluated as ``eps + base(x)`` with a single floating-point addition.

Power-law and Girsanov coefficients are half-line objects extended to the whole
line through ``|x|``; Tanaka, skew and Cantor coefficients are defined on the
whole line directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

import numpy as np

from . import _kernels as K
from .errors import ConfigError, ParameterError

DEFAULT_TOLERANCE = 2.0**-46

KINDS = ("power_law", "girsanov", "tanaka", "skew", "cantor", "custom")
_KIND_CODES = {
    "power_law": K.POWER_LAW,
    "girsanov": K.GIRSANOV,
    "tanaka": K.TANAKA,
    "skew": K.SKEW,
    "cantor": K.CANTOR,
}
_BASES = {"zero": K.BASE_ZERO, "identity": K.BASE_IDENTITY}


def exact_levels(tolerance: float) -> int:
    """Recursion depth after which the Cantor value bracket is below ``tolerance``."""
    if not tolerance > 0:
        raise ParameterError("tolerance must be positive")
    return max(1, math.ceil(math.log2(1.0 / tolerance)))


@dataclass(frozen=True)
class HolderSpec:
    """Claimed modulus |sigma(x) - sigma(y)| <= constant * |x - y|**exponent."""

    exponent: float
    constant: float = 1.0
    valid_radius: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.exponent <= 1.0:
            raise ParameterError("Hoelder exponent must lie in [0, 1]")
        if not self.constant > 0:
            raise ParameterError("Hoelder constant must be positive")


@dataclass(frozen=True)
class NakaoLeGallSpec:
    """Generalised Nakao-Le Gall class C(eps, f, L).

    ``sigma >= epsilon`` everywhere and
    ``|sigma(x) - sigma(y)| <= |x - y|**exponent * |f(x) - f(y)|**0.5``
    for ``|x - y| <= valid_radius``, with ``f`` bounded and nondecreasing.
    The Hoelder-style index of the class is ``H = 2 * exponent``.
    """

    epsilon: float
    exponent: float
    bounding_function: Callable[[np.ndarray], np.ndarray]
    f_sup: float
    valid_radius: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 0.5:
            raise ParameterError("epsilon must lie in [0, 1/2]")
        if not 0.0 <= self.exponent <= 0.5:
            raise ParameterError("exponent L must lie in [0, 1/2]")

    @property
    def holder_index(self) -> float:
        return 2.0 * self.exponent


@dataclass(frozen=True)
class DiffusionSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    shift: float = 0.0
    fn: Callable | None = field(default=None, compare=False, repr=False)
    label: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown coefficient kind {self.kind!r}")
        if not (math.isfinite(self.shift) and self.shift >= 0.0):
            raise ParameterError("shift must be a finite non-negative number")
        p = self.params
        if self.kind in ("power_law", "girsanov"):
            alpha = float(p["alpha"])
            hi = math.inf if self.kind == "power_law" else 1.0
            if not 0.0 <= alpha < hi or not math.isfinite(alpha):
                raise ParameterError(f"{self.kind} alpha={alpha} out of range")
        elif self.kind == "skew":
            if not 0.0 < float(p["alpha"]) < 1.0:
                raise ParameterError("skew alpha must lie in (0, 1)")
        elif self.kind == "cantor":
            lam = float(p["lambda"])
            if not 0.0 < lam < 1.0:
                raise ParameterError("lambda must lie in (0, 1)")
            n = p.get("iterate")
            if n is not None and (int(n) != n or n < 0):
                raise ParameterError("iterate must be a non-negative integer")
            if p.get("base", "zero") not in _BASES:
                raise ParameterError("cantor base must be 'zero' or 'identity'")
        elif self.kind == "custom":
            if self.fn is None and "value" not in p:
                raise ParameterError("custom coefficient needs a callable or a constant 'value'")

    # ------------------------------------------------------------------ constructors
    @classmethod
    def power_law(cls, alpha: float, shift: float = 0.0) -> "DiffusionSpec":
        return cls("power_law", {"alpha": float(alpha)}, shift)

    @classmethod
    def girsanov(cls, alpha: float, shift: float = 0.0) -> "DiffusionSpec":
        return cls("girsanov", {"alpha": float(alpha)}, shift)

    @classmethod
    def tanaka(cls, shift: float = 0.0) -> "DiffusionSpec":
        return cls("tanaka", {}, shift)

    @classmethod
    def skew(cls, alpha: float, shift: float = 0.0) -> "DiffusionSpec":
        return cls("skew", {"alpha": float(alpha)}, shift)

    @classmethod
    def cantor(
        cls,
        lam: float,
        iterate: int | None = None,
        base: str = "zero",
        shift: float = 0.0,
        tolerance: float = DEFAULT_TOLERANCE,
    ) -> "DiffusionSpec":
        """Extended middle-``lam`` Cantor function; ``iterate=None`` is the exact fixed point."""
        params = {"lambda": float(lam), "iterate": iterate, "base": base, "tolerance": float(tolerance)}
        return cls("cantor", params, shift)

    @classmethod
    def custom(cls, fn: Callable, label: str = "custom", shift: float = 0.0) -> "DiffusionSpec":
        return cls("custom", {}, shift, fn=fn, label=label)

    @classmethod
    def constant(cls, value: float, shift: float = 0.0) -> "DiffusionSpec":
        return cls("custom", {"value": float(value)}, shift, label=f"constant({value})")

    def with_shift(self, shift: float) -> "DiffusionSpec":
        return replace(self, shift=float(shift))

    # ------------------------------------------------------------------ evaluation
    def kernel(self):
        """``(kind_code, params, shift)`` for the compiled loops, or None for callables."""
        p = self.params
        par = np.zeros(4)
        if self.kind == "custom":
            if self.fn is not None:
                return None
            par[0] = p["value"]
            return K.CONSTANT, par, float(self.shift)
        if self.kind in ("power_law", "girsanov", "skew"):
            par[0] = p["alpha"]
        elif self.kind == "cantor":
            n = p.get("iterate")
            par[0] = p["lambda"]
            par[1] = exact_levels(p.get("tolerance", DEFAULT_TOLERANCE)) if n is None else n
            par[2] = _BASES[p.get("base", "zero")]
            par[3] = 1.0 if n is None else 0.0
        return _KIND_CODES[self.kind], par, float(self.shift)

    def base(self, x):
        """Coefficient without the shift."""
        return replace(self, shift=0.0)(x)

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        scalar = arr.ndim == 0
        flat = np.ascontiguousarray(arr.reshape(-1))
        ker = self.kernel()
        if ker is None:
            base = np.asarray(self.fn(flat), dtype=float)
            if base.shape != flat.shape:
                base = np.broadcast_to(base, flat.shape).astype(float)
            out = self.shift + base
        else:
            code, par, shift = ker
            out = K.coef_array(flat, code, par, shift)
        if scalar:
            return float(out[0])
        return out.reshape(arr.shape)

    eval = __call__

    # ------------------------------------------------------------------ metadata
    @property
    def full_line(self) -> bool:
        return self.kind in ("tanaka", "skew", "cantor", "custom")

    @property
    def vanishes_at_zero(self) -> bool:
        return self(0.0) == 0.0

    @property
    def default_interval(self) -> tuple[float, float]:
        if self.kind == "cantor":
            return (-0.5, 1.5)
        return (-2.0, 2.0) if self.full_line else (0.0, 2.0)

    def holder_certificate(self) -> HolderSpec | None:
        """Known Hoelder modulus of the unshifted coefficient, if any."""
        p = self.params
        if self.kind in ("power_law", "girsanov") and float(p["alpha"]) <= 1.0:
            return HolderSpec(float(p["alpha"]), 1.0)
        if self.kind == "cantor" and p.get("iterate") is None:
            from .cantor import holder_lambda

            return HolderSpec(holder_lambda(p["lambda"]).value, 1.0)
        if self.kind == "custom" and self.fn is None:
            return HolderSpec(1.0, 1.0)
        return None

    def sup_norm_estimate(self, interval: tuple[float, float] | None = None, points: int = 4097) -> float:
        """Grid estimate of sup |sigma| over ``interval`` (a lower bound)."""
        lo, hi = interval or self.default_interval
        return float(np.max(np.abs(self(np.linspace(lo, hi, points)))))

    # ------------------------------------------------------------------ JSON
    def to_json(self) -> dict:
        if self.kind == "custom" and self.fn is not None:
            raise ConfigError("callable custom coefficients cannot be serialised")
        params = {k: v for k, v in self.params.items()}
        return {"kind": self.kind, "params": params, "shift": self.shift}

    @classmethod
    def from_json(cls, obj: Mapping[str, Any]) -> "DiffusionSpec":
        if not isinstance(obj, Mapping) or "kind" not in obj:
            raise ConfigError("coefficient JSON must be an object with a 'kind' field")
        kind = obj["kind"]
        params = dict(obj.get("params", {}))
        shift = float(obj.get("shift", 0.0))
        try:
            if kind == "cantor":
                return cls.cantor(
                    params["lambda"],
                    params.get("iterate"),
                    params.get("base", "zero"),
                    shift,
                    params.get("tolerance", DEFAULT_TOLERANCE),
                )
            if kind == "custom":
                if "value" not in params:
                    raise ConfigError("custom coefficients in JSON must give a constant 'value'")
                return cls.constant(params["value"], shift)
            return cls(kind, params, shift)
        except KeyError as exc:
            raise ConfigError(f"missing parameter {exc.args[0]!r} for kind {kind!r}") from exc


# ---------------------------------------------------------------------- sup distance
def cantor_breakpoints(lam: float, levels: int) -> np.ndarray:
    """Endpoints of the removed middle intervals down to ``levels``, together with
    their floating-point neighbours on both sides."""
    lefts = np.array([0.0])
    widths = np.array([1.0])
    pts = [np.array([0.0, 1.0])]
    for _ in range(levels):
        g0 = lefts + widths * 0.5 * (1.0 - lam)
        g1 = lefts + widths * 0.5 * (1.0 + lam)
        pts.append(g0)
        pts.append(g1)
        lefts = np.concatenate([lefts, g1])
        widths = np.concatenate([widths, widths]) * 0.5 * (1.0 - lam)
    p = np.concatenate(pts)
    p = np.concatenate([p, np.nextafter(p, -np.inf), np.nextafter(p, np.inf)])
    return np.unique(p)


def default_grid(
    *specs: DiffusionSpec,
    interval: tuple[float, float] | None = None,
    points: int = 2**17 + 1,
    breakpoint_levels: int = 16,
) -> np.ndarray:
    """Uniform grid plus the Cantor breakpoints of any Cantor spec involved."""
    if interval is None:
        if specs and all(s.kind == "cantor" for s in specs):
            interval = (0.0, 1.0)
        else:
            lo = min(s.default_interval[0] for s in specs) if specs else 0.0
            hi = max(s.default_interval[1] for s in specs) if specs else 1.0
            interval = (lo, hi)
    grids = [np.linspace(interval[0], interval[1], points)]
    for s in specs:
        if s.kind == "cantor":
            n = s.params.get("iterate")
            levels = breakpoint_levels if n is None else min(int(n) + 1, breakpoint_levels)
            grids.append(cantor_breakpoints(s.params["lambda"], levels))
    return np.unique(np.concatenate(grids))


def sup_distance(a: DiffusionSpec, b: DiffusionSpec, grid=None) -> float:
    """max over the grid of |a(x) - b(x)|.

    This is a lower bound on the true supremum; with the default grid (dense
    uniform points plus Cantor breakpoints) it is sharp for the built-in
    coefficients, which are monotone or piecewise simple.
    """
    if grid is None:
        grid = default_grid(a, b)
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ParameterError("sup_distance needs a non-empty grid")
    return float(np.max(np.abs(a(grid) - b(grid))))


# ---------------------------------------------------------------------- regularity
@dataclass
class RegularityReport:
    violations: list
    max_ratio: float
    samples: int

    @property
    def ok(self) -> bool:
        return not self.violations


def _sample_pairs(rng, n, interval, radius):
    lo, hi = interval
    x = rng.uniform(lo, hi, n)
    half = n // 2
    # half the offsets uniform on the radius, half log-uniform down to 1e-12 * radius
    off = np.empty(n)
    off[:half] = rng.uniform(0.0, radius, half)
    off[half:] = radius * 10.0 ** rng.uniform(-12.0, 0.0, n - half)
    off *= rng.choice([-1.0, 1.0], n)
    y = np.clip(x + off, lo, hi)
    return x, y


def check_regularity(
    spec: DiffusionSpec,
    reg: HolderSpec | NakaoLeGallSpec,
    samples: int = 100_000,
    seed: int = 0,
    interval: tuple[float, float] | None = None,
    rtol: float = 1e-12,
    max_reported: int = 20,
) -> RegularityReport:
    """Search random pairs for violations of a claimed modulus of continuity.

    Sampling is a guardrail, not a proof. Ratios above ``1 + rtol`` count as
    violations; ``rtol`` only absorbs rounding in the power evaluations.
    """
    if samples < 1:
        raise ParameterError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    interval = interval or spec.default_interval
    x, y = _sample_pairs(rng, samples, interval, reg.valid_radius)
    sx, sy = spec(x), spec(y)
    lhs = np.abs(sx - sy)
    dist = np.abs(x - y)
    if isinstance(reg, HolderSpec):
        rhs = reg.constant * dist**reg.exponent
        floor_bad = np.zeros(samples, dtype=bool)
    else:
        f = reg.bounding_function
        rhs = dist**reg.exponent * np.sqrt(np.abs(np.asarray(f(x)) - np.asarray(f(y))))
        floor_bad = (sx < reg.epsilon) | (sy < reg.epsilon)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    bad = (ratio > 1.0 + rtol) | floor_bad
    idx = np.flatnonzero(bad)[:max_reported]
    violations = [(float(x[i]), float(y[i]), float(lhs[i]), float(rhs[i])) for i in idx]
    return RegularityReport(violations, float(np.max(ratio)), samples)
