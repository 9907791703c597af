"""Middle-lambda Cantor functions.

The Cantor function c is the fixed point of the contraction

    H(g)(x) = g(2x/(1-lam)) / 2                         for 0 <= x < (1-lam)/2
              1/2                                       on the middle gap
              1/2 + g(2x/(1-lam) - (1+lam)/(1-lam)) / 2  for (1+lam)/2 <= x <= 1

and the iterates are c_{n+1} = H(c_n) from an arbitrary bounded c_0.

Exact mode descends until the value bracket is below the tolerance. Each level
rescales the position by 2/(1-lam), so unless that map is exact in binary
(lam = 1/2, 3/4, ...) a rounding error of a few ulps in x turns into a value
error of order eps**H_lam, about 1e-10 at lam = 1/3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from . import _kernels as K
from .coefficients import DEFAULT_TOLERANCE, DiffusionSpec, exact_levels
from .errors import DomainError, ParameterError

Base = Union[str, Callable[[np.ndarray], np.ndarray]]


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 < lam < 1.0:
        raise ParameterError(f"lambda={lam} must lie strictly inside (0, 1)")
    return lam


@dataclass(frozen=True)
class HolderExponentLambda:
    lam: float
    value: float


def holder_lambda(lam: float) -> HolderExponentLambda:
    """H = log 2 / (log 2 - log(1 - lam)); decreasing in lam, 1/2 at lam = 1/2."""
    lam = _check_lambda(lam)
    return HolderExponentLambda(lam, math.log(2.0) / (math.log(2.0) - math.log1p(-lam)))


@dataclass(frozen=True)
class CantorFunction:
    lam: float
    mode: str = "exact"
    n: int = 0
    base: Base = "zero"
    tolerance: float = DEFAULT_TOLERANCE
    extended: bool = True

    def __post_init__(self):
        _check_lambda(self.lam)
        if self.mode not in ("exact", "iterate"):
            raise ParameterError("mode must be 'exact' or 'iterate'")
        if self.mode == "iterate" and (int(self.n) != self.n or self.n < 0):
            raise ParameterError("iterate count n must be a non-negative integer")
        if isinstance(self.base, str) and self.base not in ("zero", "identity"):
            raise ParameterError("base must be 'zero', 'identity' or a callable")

    @property
    def levels(self) -> int:
        return exact_levels(self.tolerance) if self.mode == "exact" else int(self.n)

    def __call__(self, x):
        return cantor_eval(self, x)

    def apply_map(self, x):
        """H(self)(x): one extra application of the three-branch map."""
        x = np.asarray(x, dtype=float)
        lam = self.lam
        out = np.empty_like(x)
        left = x < 0.5 * (1 - lam)
        mid = (~left) & (x < 0.5 * (1 + lam))
        right = ~(left | mid)
        out[left] = 0.5 * self(np.clip(2 * x[left] / (1 - lam), 0.0, 1.0))
        out[mid] = 0.5
        out[right] = 0.5 + 0.5 * self(np.clip(2 * x[right] / (1 - lam) - (1 + lam) / (1 - lam), 0.0, 1.0))
        return out

    def to_spec(self, shift: float = 0.0) -> DiffusionSpec:
        if not isinstance(self.base, str):
            raise ParameterError("only 'zero' and 'identity' bases map onto a DiffusionSpec")
        n = None if self.mode == "exact" else int(self.n)
        return DiffusionSpec.cantor(self.lam, n, self.base, shift, self.tolerance)


def build_iterate(lam: float, n: int, base: Base = "zero", extended: bool = True) -> CantorFunction:
    """c_n = H^n(c_0) evaluated lazily: each call unrolls exactly n map applications."""
    _check_lambda(lam)
    if int(n) != n or n < 0:
        raise ParameterError("n must be a non-negative integer")
    return CantorFunction(lam, "iterate", int(n), base, extended=extended)


def _descend_callable(x, lam, levels, base):
    """Vectorised n-fold descent for an arbitrary Python base function."""
    acc = np.zeros_like(x)
    scale = np.ones_like(x)
    done = np.zeros(x.shape, dtype=bool)
    y = x.copy()
    left_edge, right_edge = 0.5 * (1 - lam), 0.5 * (1 + lam)
    for _ in range(levels):
        act = ~done
        left = act & (y < left_edge)
        mid = act & (y >= left_edge) & (y < right_edge)
        right = act & (y >= right_edge)
        acc[mid] += 0.5 * scale[mid]
        done |= mid
        y[left] = 2 * y[left] / (1 - lam)
        acc[right] += 0.5 * scale[right]
        y[right] = 2 * y[right] / (1 - lam) - (1 + lam) / (1 - lam)
        np.clip(y, 0.0, 1.0, out=y)
        scale[act & ~mid] *= 0.5
    out = acc.copy()
    act = ~done
    if act.any():
        out[act] += scale[act] * np.asarray(base(y[act]), dtype=float)
    return out


def cantor_eval(f: CantorFunction, x):
    """Evaluate a Cantor function or iterate at ``x`` (scalar or array)."""
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    flat = np.ascontiguousarray(arr.reshape(-1))
    outside = (flat < 0.0) | (flat > 1.0)
    if not f.extended and outside.any():
        raise DomainError("Cantor function evaluated outside [0, 1] with extended=False")
    if isinstance(f.base, str):
        code = K.BASE_IDENTITY if f.base == "identity" else K.BASE_ZERO
        out = K.cantor_array(flat, f.lam, f.levels, code, f.mode == "exact")
    else:
        inside = ~outside
        out = np.where(flat > 1.0, 1.0, 0.0)
        out[inside] = _descend_callable(flat[inside], f.lam, f.levels, f.base)
    return float(out[0]) if scalar else out.reshape(arr.shape)


def iterate_error_bound(n: int, sup01: float) -> float:
    """Uniform bound 2**(1 - n) * sup|c_0 - c_1| on |c - c_n|."""
    if int(n) != n or n < 1:
        raise ParameterError("the iterate bound is stated for n >= 1")
    if sup01 < 0:
        raise ParameterError("sup01 must be non-negative")
    return 2.0 ** (1 - int(n)) * float(sup01)


def sup01(lam: float, base: Base = "zero", grid=None) -> float:
    """Grid sup of |c_0 - c_1| over [0, 1] for the extended iterates."""
    from .coefficients import cantor_breakpoints

    if grid is None:
        grid = np.unique(np.concatenate([np.linspace(0, 1, 2**17 + 1), cantor_breakpoints(lam, 2)]))
    c0 = build_iterate(lam, 0, base)
    c1 = build_iterate(lam, 1, base)
    return float(np.max(np.abs(c0(grid) - c1(grid))))
