"""Parametric reduction over damper gains and surrogate-based gain optimization.

Per-gain interpolation bases are concatenated and orthonormalized into one
global basis; the projected model keeps the gains as free parameters and its
H2 norm serves as a cheap surrogate objective.
"""

from __future__ import annotations

import logging
import time
from copy import deepcopy
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ContractViolationError, NonConvergenceError
from .h2norm import DEFAULT_ORACLE_CAP, full_order_objective
from .kernels import orth
from .model import check_gains
from .modalsolve import to_modal
from .optimizer import feasibility_wrap, nelder_mead
from .sym2irka import initial_interpolation, project, sym2irka

__all__ = ['AggregateBasis', 'OptimizationReport', 'OptimizerSettings', 'Surrogate', 'aggregate',
           'build_surrogate', 'greedy_deviation', 'optimize_adaptive', 'optimize_full', 'optimize_predetermined',
           'optimize_surrogate']

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class AggregateBasis:
    X: np.ndarray
    contributors: tuple  # (gain vector, basis width) pairs
    tol: float

    @property
    def R(self):
        return self.X.shape[1]


def aggregate(bases, tol=1e-10, gains=None):
    """Orthonormalize ``[V1, ..., Vm]`` into one basis."""
    bases = list(bases)
    if not bases:
        raise ContractViolationError('aggregate needs at least one basis')
    n = bases[0].shape[0]
    if any(V.shape[0] != n for V in bases):
        raise ContractViolationError('all bases must share the row dimension')
    gains = [None] * len(bases) if gains is None else list(gains)
    X = orth(np.hstack(bases), tol)
    contributors = tuple((None if g is None else np.array(g, dtype=float), V.shape[1])
                         for g, V in zip(gains, bases))
    return AggregateBasis(X, contributors, tol)


@dataclass(frozen=True)
class OptimizerSettings:
    x0: tuple
    tol_x: float = 1e-4
    tol_f: float = 1e-4
    max_evals: int | None = None


@dataclass
class OptimizationReport:
    gains: list
    surrogate_h2: float
    full_h2: float | None
    samples: list
    sym2irka_iterations: int
    sample_iterations: list
    reduced_dim: int
    strategy: str
    mode: str
    converged: bool
    outer_iterations: int = 1
    surrogate_history: list = field(default_factory=list)
    gain_history: list = field(default_factory=list)
    nfev: int = 0
    tol_diff_norm: str = 'max'
    timings: dict = field(default_factory=dict)
    # best vertex per optimizer iteration (last optimizer run)
    trajectory: list = field(default_factory=list)
    # final surrogate; not serialized
    model: object = field(default=None, repr=False, compare=False)

    def to_dict(self, timings=False):
        skip = {'model'} if timings else {'model', 'timings'}
        return {f.name: deepcopy(getattr(self, f.name)) for f in fields(self)
                if f.name not in skip}


def _run_samples(ms, samples, r, strategy, interp, it_max, tol, orth_tol):
    bases, its = [], []
    for g in samples:
        res = sym2irka(ms, g, r, strategy, interp, it_max, tol, orth_tol)
        interp = res.interp  # recycle shifts and tangents
        bases.append(res.X)
        its.append(res.iterations)
        logger.info('sample %s: %d iterations, converged=%s', g, res.iterations, res.converged)
    return bases, its, interp


def optimize_surrogate(rm, bounds, settings):
    """Nelder-Mead on ``g -> ||F_r(.; g)||_H2`` with bound handling."""
    obj = feasibility_wrap(lambda g: rm.h2(g).value, bounds, settings.x0)
    return nelder_mead(obj, settings.x0, settings.tol_x, settings.tol_f, settings.max_evals)


def _offline(ms, r, strategy, it_max, tol, orth_tol, offline):
    t = time.perf_counter()
    if offline is None:
        offline = initial_interpolation(ms, r, strategy, it_max, tol, orth_tol)
    return offline, time.perf_counter() - t


def _as_list(g):
    return [float(v) for v in np.asarray(g, dtype=float)]


@dataclass(frozen=True, eq=False)
class Surrogate:
    """Projected parametric model together with its provenance."""
    model: object
    basis: AggregateBasis
    samples: list
    iterations: list  # zero-gain run first, then one entry per sample
    timings: dict


def build_surrogate(ms, samples, r, strategy, *, it_max=40, tol=1e-3, orth_tol=1e-12,
                    agg_tol=1e-10, offline=None):
    """Run sym2irka at every sample and project onto the aggregate basis."""
    samples = [check_gains(ms, g) for g in samples]
    if not samples:
        raise ContractViolationError('at least one gain sample is required')
    offline, t_off = _offline(ms, r, strategy, it_max, tol, orth_tol, offline)
    t = time.perf_counter()
    bases, its, _ = _run_samples(ms, samples, r, strategy, offline.interp, it_max, tol, orth_tol)
    t_samples = time.perf_counter() - t
    agg = aggregate(bases, agg_tol, samples)
    return Surrogate(project(ms, agg.X), agg, samples, [offline.iterations] + its,
                     {'offline': t_off, 'samples': t_samples})


def optimize_predetermined(ms, samples, r, strategy, settings, *, it_max=40, tol=1e-3,
                           orth_tol=1e-12, agg_tol=1e-10, offline=None, oracle=None):
    """Reduce at fixed gain samples, aggregate, then optimize the surrogate.

    ``offline`` may carry a precomputed zero-gain run; ``oracle`` is an
    optional callable ``g -> H2Value`` evaluated once at the optimum.
    """
    t_start = time.perf_counter()
    sur = build_surrogate(ms, samples, r, strategy, it_max=it_max, tol=tol, orth_tol=orth_tol,
                          agg_tol=agg_tol, offline=offline)
    rm = sur.model
    t = time.perf_counter()
    nm = optimize_surrogate(rm, ms.gain_bounds, settings)
    t_opt = time.perf_counter() - t
    g_star = np.clip(nm.x, ms.gain_bounds[:, 0], ms.gain_bounds[:, 1])
    full = None if oracle is None else float(oracle(g_star).value)
    return OptimizationReport(
        gains=_as_list(g_star),
        surrogate_h2=float(rm.h2(g_star).value),
        full_h2=full,
        samples=[_as_list(g) for g in sur.samples],
        sym2irka_iterations=int(sum(sur.iterations)),
        sample_iterations=[int(i) for i in sur.iterations],
        reduced_dim=sur.basis.R,
        strategy=str(strategy),
        mode='predetermined',
        converged=bool(nm.converged),
        surrogate_history=[float(nm.fun)],
        gain_history=[_as_list(g_star)],
        nfev=nm.nfev,
        timings={**sur.timings, 'optimizer': [t_opt], 'total': time.perf_counter() - t_start},
        trajectory=[_as_list(x) for x in nm.trajectory],
        model=rm,
    )


def optimize_adaptive(ms, g0, r, strategy, tol_diff, settings, *, extra_samples=(),
                      max_outer=15, it_max=40, tol=1e-3, orth_tol=1e-12, agg_tol=1e-10,
                      offline=None, oracle=None):
    """Alternate surrogate optimization and basis enrichment at the optimum.

    Stops when consecutive optimal gains differ by less than ``tol_diff`` in
    the max-norm. After ``max_outer`` loops the report is flagged unconverged
    and carries the iterate that scores best on the final surrogate.
    """
    g0 = check_gains(ms, g0)
    t_start = time.perf_counter()
    offline, t_off = _offline(ms, r, strategy, it_max, tol, orth_tol, offline)
    initial = [g0] + [check_gains(ms, g) for g in extra_samples]
    t = time.perf_counter()
    bases, its, interp = _run_samples(ms, initial, r, strategy, offline.interp, it_max, tol,
                                      orth_tol)
    t_samples = [time.perf_counter() - t]
    samples = list(initial)
    g_prev = g0
    history, ghist, t_opt = [], [], []
    converged = False
    nm = rm = agg = None
    for outer in range(1, max_outer + 1):
        agg = aggregate(bases, agg_tol, samples)
        rm = project(ms, agg.X)
        t = time.perf_counter()
        nm = optimize_surrogate(rm, ms.gain_bounds, settings)
        t_opt.append(time.perf_counter() - t)
        g_new = np.clip(nm.x, ms.gain_bounds[:, 0], ms.gain_bounds[:, 1])
        history.append(float(nm.fun))
        ghist.append(g_new)
        logger.info('adaptive loop %d: g=%s, surrogate=%.6g, R=%d', outer, g_new, nm.fun, agg.R)
        if np.max(np.abs(g_new - g_prev)) < tol_diff:
            converged = True
            break
        if outer == max_outer:
            break
        t = time.perf_counter()
        res = sym2irka(ms, g_new, r, strategy, interp, it_max, tol, orth_tol)
        t_samples.append(time.perf_counter() - t)
        interp = res.interp
        bases.append(res.X)
        its.append(res.iterations)
        samples.append(g_new)
        g_prev = g_new
    if converged:
        g_star = ghist[-1]
    else:
        vals = [rm.h2(g).value for g in ghist]
        g_star = ghist[int(np.argmin(vals))]
        logger.warning('adaptive sampling hit max_outer=%d without meeting tol_diff', max_outer)
    full = None if oracle is None else float(oracle(g_star).value)
    return OptimizationReport(
        gains=_as_list(g_star),
        surrogate_h2=float(rm.h2(g_star).value),
        full_h2=full,
        samples=[_as_list(g) for g in samples],
        sym2irka_iterations=int(offline.iterations + sum(its)),
        sample_iterations=[int(offline.iterations)] + [int(i) for i in its],
        reduced_dim=agg.R,
        strategy=str(strategy),
        mode='adaptive',
        converged=converged,
        outer_iterations=len(history),
        surrogate_history=history,
        gain_history=[_as_list(g) for g in ghist],
        nfev=nm.nfev,
        timings={'offline': t_off, 'samples': t_samples, 'optimizer': t_opt,
                 'total': time.perf_counter() - t_start},
        trajectory=[_as_list(x) for x in nm.trajectory],
        model=rm,
    )


def greedy_deviation(sys, agg, candidates, *, ms=None, cap=DEFAULT_ORACLE_CAP):
    """Candidate gain with the largest gap between full and surrogate H2 norms.

    Diagnostic only: every candidate costs a full-order Lyapunov solve.
    """
    candidates = [check_gains(sys, g) for g in candidates]
    if not candidates:
        raise ContractViolationError('no candidate gains supplied')
    full = full_order_objective(sys, cap)
    ms = to_modal(sys) if ms is None else ms
    rm = project(ms, agg.X)
    devs = [abs(full(g).value - rm.h2(g).value) for g in candidates]
    k = int(np.argmax(devs))
    return candidates[k], float(devs[k])


def require_converged(report):
    if not report.converged:
        raise NonConvergenceError(f'{report.mode} optimization did not converge')
    return report


def optimize_full(sys, settings, *, cap=DEFAULT_ORACLE_CAP):
    """Reference optimum of the full-order objective under the same settings."""
    full = full_order_objective(sys, cap)
    obj = feasibility_wrap(lambda g: full(g).value, sys.gain_bounds, settings.x0)
    return nelder_mead(obj, settings.x0, settings.tol_x, settings.tol_f, settings.max_evals)
