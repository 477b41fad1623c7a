"""Nelder-Mead simplex minimization with bound handling for gains."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolationError

__all__ = ['NMResult', 'feasibility_wrap', 'nelder_mead']

RHO, CHI, PSI, SIGMA = 1.0, 2.0, 0.5, 0.5


@dataclass
class NMResult:
    x: np.ndarray
    fun: float
    nfev: int
    nit: int
    converged: bool
    # best vertex after initialization and after every iteration
    trajectory: list = field(default_factory=list)
    values: list = field(default_factory=list)


def initial_simplex(x0, rel_step=0.05, zero_step=0.00025):
    x0 = np.asarray(x0, dtype=float)
    sim = [x0.copy()]
    for i in range(x0.size):
        y = x0.copy()
        y[i] = (1 + rel_step) * y[i] if y[i] != 0 else zero_step
        sim.append(y)
    return np.array(sim)


def nelder_mead(fun, x0, tol_x=1e-4, tol_f=1e-4, max_evals=None, simplex=None):
    """Minimize ``fun`` from ``x0``.

    Stops once every vertex is within ``tol_x`` (max-norm) of the best one and
    every value within ``tol_f`` of the best value, or after ``max_evals``
    evaluations (default ``400 * dim``). Values may be ``inf``.
    """
    if tol_x <= 0 or tol_f <= 0:
        raise ContractViolationError('tolerances must be positive')
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    dim = x0.size
    max_evals = 400 * dim if max_evals is None else int(max_evals)
    sim = initial_simplex(x0) if simplex is None else np.array(simplex, dtype=float)
    nfev = 0

    def f(x):
        nonlocal nfev
        nfev += 1
        return float(fun(x.copy()))

    fs = np.array([f(v) for v in sim])
    if not np.any(np.isfinite(fs)):
        raise ContractViolationError('objective is non-finite at every initial vertex')
    order = np.argsort(fs, kind='stable')
    sim, fs = sim[order], fs[order]
    res = NMResult(sim[0].copy(), fs[0], nfev, 0, False, [sim[0].copy()], [fs[0]])

    nit = 0
    while nfev < max_evals:
        spread_f = np.max(np.abs(fs[1:] - fs[0])) if np.isfinite(fs).all() else np.inf
        spread_x = np.max(np.abs(sim[1:] - sim[0]))
        if spread_f <= tol_f and spread_x <= tol_x:
            res.converged = True
            break
        nit += 1
        xbar = sim[:-1].mean(axis=0)
        xr = (1 + RHO) * xbar - RHO * sim[-1]
        fr = f(xr)
        shrink = False
        if fr < fs[0]:
            xe = (1 + RHO * CHI) * xbar - RHO * CHI * sim[-1]
            fe = f(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
        elif fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
        elif fr < fs[-1]:
            xc = (1 + PSI * RHO) * xbar - PSI * RHO * sim[-1]
            fc = f(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
            else:
                shrink = True
        else:
            xcc = (1 - PSI) * xbar + PSI * sim[-1]
            fcc = f(xcc)
            if fcc < fs[-1]:
                sim[-1], fs[-1] = xcc, fcc
            else:
                shrink = True
        if shrink:
            for i in range(1, dim + 1):
                sim[i] = sim[0] + SIGMA * (sim[i] - sim[0])
                fs[i] = f(sim[i])
        order = np.argsort(fs, kind='stable')
        sim, fs = sim[order], fs[order]
        res.trajectory.append(sim[0].copy())
        res.values.append(fs[0])

    res.x, res.fun, res.nfev, res.nit = sim[0].copy(), fs[0], nfev, nit
    return res


def feasibility_wrap(objective, bounds, x0=None, weight=1e6):
    """Evaluate ``objective`` at the projection onto ``bounds`` plus a penalty.

    The penalty is ``mu * ||g - proj(g)||^2`` with ``mu = weight * f(x0)``
    (``weight`` alone when ``x0`` is omitted or its value is not positive and
    finite). Inside the box the raw value is returned unchanged.
    """
    bounds = np.asarray(bounds, dtype=float)
    lo, hi = bounds[:, 0], bounds[:, 1]
    mu = weight
    if x0 is not None:
        f0 = float(objective(np.clip(np.asarray(x0, dtype=float), lo, hi)))
        if np.isfinite(f0) and f0 > 0:
            mu = weight * f0

    def wrapped(g):
        g = np.asarray(g, dtype=float)
        proj = np.clip(g, lo, hi)
        val = float(objective(proj))
        gap = float(np.sum((g - proj) ** 2))
        return val if gap == 0 else val + mu * gap

    wrapped.penalty_weight = mu
    return wrapped
