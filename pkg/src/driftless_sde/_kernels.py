"""Compiled inner loops.

Every built-in diffusion coefficient is reduced to an integer kind code plus a
length-4 float parameter vector so that the Euler-Maruyama loops can evaluate it
without calling back into Python. ``coef_scalar`` is the single source of truth
for coefficient values: the vectorised ``DiffusionSpec.__call__`` goes through it
too, so simulated and evaluated coefficients agree bit for bit.
"""

import math

import numpy as np
from numba import njit

POWER_LAW = 0
GIRSANOV = 1
TANAKA = 2
SKEW = 3
CANTOR = 4
CONSTANT = 5

# Cantor parameter layout: (lambda, levels, base, exact)
BASE_ZERO = 0
BASE_IDENTITY = 1


@njit(cache=True)
def cantor_scalar(x, lam, levels, base, exact):
    """Middle-lambda Cantor function (extended by 0 below 0 and 1 above 1).

    ``levels`` applications of the three-branch map are unrolled. In exact mode
    the descent also stops on the endpoints 0 and 1 (whose values are known) and
    otherwise returns the midpoint of the remaining value bracket.
    """
    if x < 0.0:
        return 0.0
    if x > 1.0:
        return 1.0
    left = 0.5 * (1.0 - lam)
    right = 0.5 * (1.0 + lam)
    stretch = 2.0 / (1.0 - lam)
    offset = (1.0 + lam) / (1.0 - lam)
    acc = 0.0
    scale = 1.0
    for _ in range(levels):
        if exact:
            if x <= 0.0:
                return acc
            if x >= 1.0:
                return acc + scale
        if x < left:
            x = stretch * x
        elif x < right:
            return acc + 0.5 * scale
        else:
            acc += 0.5 * scale
            x = stretch * x - offset
        scale *= 0.5
        if x < 0.0:
            x = 0.0
        elif x > 1.0:
            x = 1.0
    if exact:
        if x <= 0.0:
            return acc
        if x >= 1.0:
            return acc + scale
        return acc + 0.5 * scale
    if base == BASE_IDENTITY:
        return acc + scale * x
    return acc


@njit(cache=True)
def coef_scalar(x, kind, params, shift):
    if kind == POWER_LAW:
        ax = abs(x)
        base = 0.0 if ax == 0.0 else ax ** params[0]
    elif kind == GIRSANOV:
        ax = abs(x)
        if ax == 0.0:
            base = 0.0
        else:
            p = ax ** params[0]
            base = p / (1.0 + p)
    elif kind == TANAKA:
        base = 1.0 if x > 0.0 else -1.0
    elif kind == SKEW:
        base = params[0] if x > 0.0 else 1.0 - params[0]
    elif kind == CANTOR:
        base = cantor_scalar(x, params[0], int(params[1]), int(params[2]), params[3] != 0.0)
    else:
        base = params[0]
    return shift + base


@njit(cache=True)
def coef_array(xs, kind, params, shift):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = coef_scalar(xs[i], kind, params, shift)
    return out


@njit(cache=True)
def cantor_array(xs, lam, levels, base, exact):
    out = np.empty(xs.shape[0])
    for i in range(xs.shape[0]):
        out[i] = cantor_scalar(xs[i], lam, levels, base, exact)
    return out


@njit(cache=True, nogil=True)
def em_record(dB, x0, kind, params, shift, absorb, h, record, values, tau, bad):
    """Euler-Maruyama for a block of paths, storing X at the step indices in
    ``record`` (0 means the initial value). ``bad[p]`` receives the first step
    with a non-finite state, or -1."""
    n_paths, n_steps = dB.shape
    n_rec = record.shape[0]
    for p in range(n_paths):
        x = x0
        dead = False
        tau[p] = np.nan
        bad[p] = -1
        r = 0
        while r < n_rec and record[r] == 0:
            values[p, r] = x
            r += 1
        for s in range(n_steps):
            if not dead:
                x = x + coef_scalar(x, kind, params, shift) * dB[p, s]
                if not math.isfinite(x):
                    bad[p] = s + 1
                    break
                if absorb and x <= 0.0:
                    x = 0.0
                    dead = True
                    tau[p] = (s + 1) * h
            while r < n_rec and record[r] == s + 1:
                values[p, r] = x
                r += 1


@njit(cache=True, nogil=True)
def em_coupled(dB, x0, kind0, params0, shift0, absorb0, kinds, params, shifts, absorbs,
               h, sup_err, term_err, tau0, taus, bad):
    """Drive one reference coefficient and K perturbed ones with the same
    increments; record sup and terminal |X - X_k| over the grid."""
    n_paths, n_steps = dB.shape
    k_count = kinds.shape[0]
    xs = np.empty(k_count)
    dead = np.empty(k_count, dtype=np.bool_)
    for p in range(n_paths):
        x = x0
        dead0 = False
        tau0[p] = np.nan
        bad[p] = -1
        for k in range(k_count):
            xs[k] = x0
            dead[k] = False
            taus[p, k] = np.nan
            sup_err[p, k] = 0.0
        for s in range(n_steps):
            d = dB[p, s]
            if not dead0:
                x = x + coef_scalar(x, kind0, params0, shift0) * d
                if not math.isfinite(x):
                    bad[p] = s + 1
                    break
                if absorb0 and x <= 0.0:
                    x = 0.0
                    dead0 = True
                    tau0[p] = (s + 1) * h
            for k in range(k_count):
                if not dead[k]:
                    y = xs[k] + coef_scalar(xs[k], kinds[k], params[k], shifts[k]) * d
                    if not math.isfinite(y):
                        bad[p] = s + 1
                        break
                    if absorbs[k] and y <= 0.0:
                        y = 0.0
                        dead[k] = True
                        taus[p, k] = (s + 1) * h
                    xs[k] = y
                e = abs(x - xs[k])
                if e > sup_err[p, k]:
                    sup_err[p, k] = e
            if bad[p] >= 0:
                break
        for k in range(k_count):
            term_err[p, k] = abs(x - xs[k])
