"""Coupled Euler-Maruyama simulation of dX = sigma(X) dB.

Brownian increments come from a counter-based Philox stream keyed by
``(seed, path_index)``; the k-th increment of a path is therefore a fixed
function of ``(seed, path_index, k)``, and every Monte Carlo estimate is
independent of how paths are split across workers. Paths are processed in
fixed-size blocks and results are written back by path index, so the reduction
order never changes either.

The supremum over [0, T] is taken over grid points only, which biases it
slightly downwards compared with the continuous-time supremum.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import _kernels as K
from .coefficients import DiffusionSpec
from .errors import ConfigError, SimulationError

MAX_BLOCK_ELEMENTS = 2**22


class Statistic(str, enum.Enum):
    MEAN_SUP = "MeanSup"
    MEAN_SUP_SQUARED = "MeanSupSquared"
    MEAN_ABS_TERMINAL = "MeanAbsTerminal"


@dataclass(frozen=True)
class SimConfig:
    x0: float = 1.0
    T: float = 1.0
    steps: int = 1000
    paths: int = 10_000
    seed: int = 0
    absorb_at_zero: bool | None = None  # None: absorb iff sigma(0) == 0 (which excludes shifts)
    workers: int = 1

    def __post_init__(self):
        if not (self.x0 > 0 and math.isfinite(self.x0)):
            raise ConfigError("x0 must be a positive finite number")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError("T must be positive")
        if int(self.steps) != self.steps or self.steps < 1:
            raise ConfigError("steps must be an integer >= 1")
        if int(self.paths) != self.paths or self.paths < 1:
            raise ConfigError("paths must be an integer >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def h(self) -> float:
        return self.T / self.steps

    def absorbs(self, sigma: DiffusionSpec) -> bool:
        if self.absorb_at_zero is None:
            return sigma.shift == 0.0 and sigma.vanishes_at_zero
        return bool(self.absorb_at_zero)

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class CoupledErrorSample:
    path_index: int
    sup_error: float
    terminal_error: float
    absorption_time_X: float | None
    absorption_time_Xn: float | None


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    count: int
    statistic: Statistic | None = None


@dataclass
class Path:
    times: np.ndarray
    values: np.ndarray
    absorption_time: float | None


def _key(seed: int, path_index: int) -> int:
    return ((int(path_index) & (2**64 - 1)) << 64) | (int(seed) & (2**64 - 1))


def brownian_increments(seed: int, path_index: int, steps: int, h: float) -> np.ndarray:
    """``steps`` i.i.d. N(0, h) draws from the Philox stream keyed by (seed, path_index)."""
    if steps < 1 or not h > 0:
        raise ConfigError("need steps >= 1 and h > 0")
    rng = np.random.Generator(np.random.Philox(key=_key(seed, path_index)))
    return math.sqrt(h) * rng.standard_normal(steps)


def _increment_block(seed, start, stop, steps, h):
    out = np.empty((stop - start, steps))
    for i, p in enumerate(range(start, stop)):
        out[i] = brownian_increments(seed, p, steps, h)
    return out


def _blocks(paths: int, steps: int):
    size = max(1, min(paths, MAX_BLOCK_ELEMENTS // steps, 4096))
    return [(s, min(s + size, paths)) for s in range(0, paths, size)]


def _run_blocks(fn, cfg: SimConfig):
    blocks = _blocks(cfg.paths, cfg.steps)
    if cfg.workers == 1 or len(blocks) == 1:
        for b in blocks:
            fn(*b)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            list(pool.map(lambda b: fn(*b), blocks))


def _raise_bad(bad, start):
    hit = np.flatnonzero(bad >= 0)
    if hit.size:
        raise SimulationError(int(bad[hit[0]]), start + int(hit[0]))


# ---------------------------------------------------------------------- single coefficient
def _record_numpy(dB, x0, sigma, absorb, h, record, values, tau, bad):
    n_paths, n_steps = dB.shape
    x = np.full(n_paths, float(x0))
    dead = np.zeros(n_paths, dtype=bool)
    tau[:] = np.nan
    bad[:] = -1
    ri = 0
    while ri < record.size and record[ri] == 0:
        values[:, ri] = x
        ri += 1
    for s in range(n_steps):
        live = ~dead
        x[live] = x[live] + sigma(x[live]) * dB[live, s]
        nonfinite = ~np.isfinite(x) & (bad < 0)
        bad[nonfinite] = s + 1
        if absorb:
            hit = live & (x <= 0.0)
            x[hit] = 0.0
            tau[hit] = (s + 1) * h
            dead |= hit
        while ri < record.size and record[ri] == s + 1:
            values[:, ri] = x
            ri += 1


def simulate_at(sigma: DiffusionSpec, cfg: SimConfig, record_steps) -> tuple[np.ndarray, np.ndarray]:
    """Values of X at the given grid step indices for every path.

    Returns ``(values, tau)`` with ``values`` of shape (paths, len(record_steps))
    and ``tau`` the absorption times (NaN when not absorbed).
    """
    record = np.asarray(sorted(set(int(r) for r in record_steps)), dtype=np.int64)
    if record.size == 0 or record[0] < 0 or record[-1] > cfg.steps:
        raise ConfigError("record steps must lie in [0, steps]")
    values = np.empty((cfg.paths, record.size))
    tau = np.empty(cfg.paths)
    absorb = cfg.absorbs(sigma)
    ker = sigma.kernel()
    h = cfg.h

    def work(start, stop):
        dB = _increment_block(cfg.seed, start, stop, cfg.steps, h)
        bad = np.empty(stop - start, dtype=np.int64)
        v = values[start:stop]
        if ker is None:
            _record_numpy(dB, cfg.x0, sigma, absorb, h, record, v, tau[start:stop], bad)
        else:
            code, par, shift = ker
            K.em_record(dB, float(cfg.x0), code, par, shift, absorb, h, record, v, tau[start:stop], bad)
        _raise_bad(bad, start)

    _run_blocks(work, cfg)
    return values, tau


def euler_maruyama(sigma: DiffusionSpec, cfg: SimConfig, increments=None, path_index: int = 0) -> Path:
    """One Euler-Maruyama path, X_{k+1} = X_k + sigma(X_k) dB_k, frozen at 0 once absorbed."""
    if increments is None:
        increments = brownian_increments(cfg.seed, path_index, cfg.steps, cfg.h)
    dB = np.asarray(increments, dtype=float).reshape(1, -1)
    steps = dB.shape[1]
    if steps != cfg.steps:
        raise ConfigError("increments length must equal cfg.steps")
    record = np.arange(steps + 1, dtype=np.int64)
    values = np.empty((1, steps + 1))
    tau = np.empty(1)
    bad = np.empty(1, dtype=np.int64)
    absorb = cfg.absorbs(sigma)
    ker = sigma.kernel()
    if ker is None:
        _record_numpy(dB, cfg.x0, sigma, absorb, cfg.h, record, values, tau, bad)
    else:
        code, par, shift = ker
        K.em_record(dB, float(cfg.x0), code, par, shift, absorb, cfg.h, record, values, tau, bad)
    _raise_bad(bad, path_index)
    t = None if np.isnan(tau[0]) else float(tau[0])
    return Path(np.linspace(0.0, cfg.T, steps + 1), values[0], t)


# ---------------------------------------------------------------------- coupled
@dataclass
class CoupledBatch:
    """Per-path coupled errors for one reference coefficient and K perturbations."""

    sup_error: np.ndarray  # (paths, K)
    terminal_error: np.ndarray  # (paths, K)
    tau_X: np.ndarray  # (paths,)
    tau_Xn: np.ndarray  # (paths, K)

    def samples(self, k: int = 0) -> list[CoupledErrorSample]:
        def opt(v):
            return None if np.isnan(v) else float(v)

        return [
            CoupledErrorSample(i, float(self.sup_error[i, k]), float(self.terminal_error[i, k]),
                               opt(self.tau_X[i]), opt(self.tau_Xn[i, k]))
            for i in range(self.sup_error.shape[0])
        ]

    def statistic(self, stat: Statistic, k: int = 0) -> np.ndarray:
        stat = Statistic(stat)
        if stat is Statistic.MEAN_SUP:
            return self.sup_error[:, k]
        if stat is Statistic.MEAN_SUP_SQUARED:
            return self.sup_error[:, k] ** 2
        return self.terminal_error[:, k]


def _coupled_numpy(dB, x0, sigma, absorb0, sigmas, absorbs, h, sup_err, term_err, tau0, taus, bad):
    n_paths, n_steps = dB.shape
    k_count = len(sigmas)
    x = np.full(n_paths, float(x0))
    xs = np.full((n_paths, k_count), float(x0))
    dead0 = np.zeros(n_paths, dtype=bool)
    dead = np.zeros((n_paths, k_count), dtype=bool)
    tau0[:] = np.nan
    taus[:] = np.nan
    sup_err[:] = 0.0
    bad[:] = -1
    for s in range(n_steps):
        d = dB[:, s]
        live = ~dead0
        x[live] = x[live] + sigma(x[live]) * d[live]
        if absorb0:
            hit = live & (x <= 0.0)
            x[hit] = 0.0
            tau0[hit] = (s + 1) * h
            dead0 |= hit
        for k, sk in enumerate(sigmas):
            live = ~dead[:, k]
            xs[live, k] = xs[live, k] + sk(xs[live, k]) * d[live]
            if absorbs[k]:
                hit = live & (xs[:, k] <= 0.0)
                xs[hit, k] = 0.0
                taus[hit, k] = (s + 1) * h
                dead[:, k] |= hit
        nonfinite = (~np.isfinite(x) | ~np.all(np.isfinite(xs), axis=1)) & (bad < 0)
        bad[nonfinite] = s + 1
        np.maximum(sup_err, np.abs(x[:, None] - xs), out=sup_err)
    term_err[:] = np.abs(x[:, None] - xs)


def coupled_batch(sigma: DiffusionSpec, sigmas_n, cfg: SimConfig) -> CoupledBatch:
    """Run X (coefficient ``sigma``) and each X_n (``sigmas_n``) on shared increments."""
    sigmas_n = list(sigmas_n)
    k_count = len(sigmas_n)
    if k_count == 0:
        raise ConfigError("need at least one perturbed coefficient")
    P = cfg.paths
    sup_err = np.empty((P, k_count))
    term_err = np.empty((P, k_count))
    tau0 = np.empty(P)
    taus = np.empty((P, k_count))
    absorb0 = cfg.absorbs(sigma)
    absorbs = np.array([cfg.absorbs(s) for s in sigmas_n], dtype=np.bool_)
    kers = [sigma.kernel()] + [s.kernel() for s in sigmas_n]
    compiled = all(k is not None for k in kers)
    if compiled:
        code0, par0, shift0 = kers[0]
        codes = np.array([k[0] for k in kers[1:]], dtype=np.int64)
        pars = np.array([k[1] for k in kers[1:]])
        shifts = np.array([k[2] for k in kers[1:]])
    h = cfg.h

    def work(start, stop):
        dB = _increment_block(cfg.seed, start, stop, cfg.steps, h)
        bad = np.empty(stop - start, dtype=np.int64)
        sl = slice(start, stop)
        if compiled:
            K.em_coupled(dB, float(cfg.x0), code0, par0, shift0, absorb0, codes, pars, shifts, absorbs,
                         h, sup_err[sl], term_err[sl], tau0[sl], taus[sl], bad)
        else:
            _coupled_numpy(dB, cfg.x0, sigma, absorb0, sigmas_n, absorbs, h,
                           sup_err[sl], term_err[sl], tau0[sl], taus[sl], bad)
        _raise_bad(bad, start)

    _run_blocks(work, cfg)
    return CoupledBatch(sup_err, term_err, tau0, taus)


def coupled_error(sigma: DiffusionSpec, sigma_n: DiffusionSpec, cfg: SimConfig, path_index: int = 0) -> CoupledErrorSample:
    """Coupled error of a single path, both recursions driven by the same increments."""
    one = SimConfig(cfg.x0, cfg.T, cfg.steps, 1, cfg.seed, cfg.absorb_at_zero)
    dB = brownian_increments(cfg.seed, path_index, cfg.steps, cfg.h).reshape(1, -1)
    x = euler_maruyama(sigma, one, dB[0])
    xn = euler_maruyama(sigma_n, one, dB[0])
    diff = np.abs(x.values - xn.values)
    return CoupledErrorSample(path_index, float(diff.max()), float(diff[-1]), x.absorption_time, xn.absorption_time)


def estimate(values: np.ndarray, statistic: Statistic | None = None) -> MCEstimate:
    values = np.asarray(values, dtype=float)
    n = values.size
    mean = float(np.mean(values))
    se = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return MCEstimate(mean, se, n, None if statistic is None else Statistic(statistic))


def mc_estimate(sigma: DiffusionSpec, sigma_n: DiffusionSpec, cfg: SimConfig,
                statistic: Statistic = Statistic.MEAN_SUP_SQUARED) -> MCEstimate:
    """Monte Carlo estimate of E[sup|X - X_n|], E[sup|X - X_n|^2] or E|X_T - X_n,T|."""
    if cfg.paths < 2:
        raise ConfigError("mc_estimate needs at least 2 paths")
    batch = coupled_batch(sigma, [sigma_n], cfg)
    return estimate(batch.statistic(statistic), statistic)


def terminal_mean(sigma: DiffusionSpec, cfg: SimConfig) -> MCEstimate:
    """MC estimate of E[X_T] (the martingale check)."""
    values, _ = simulate_at(sigma, cfg, [cfg.steps])
    return estimate(values[:, 0])
