"""H2 norms of second-order systems via first-order realizations.

The squared norm is ``trace(E1^T X E1)`` where ``A^T X + X A = -H1^T H1``.
No ``1/(2 pi)`` factor is applied: with the frequency integral normalized by
``1/(2 pi)`` Parseval gives exactly the Gramian trace. Any constant factor is
irrelevant for minimization anyway.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import FactorizationError, OracleCapError, StabilityError
from .kernels import lyap_solve
from .model import damping_matrix, internal_damping

__all__ = ['FirstOrderRealization', 'H2Value', 'DEFAULT_ORACLE_CAP', 'full_order_objective',
           'h2_full_oracle', 'h2_norm', 'linearize']

DEFAULT_ORACLE_CAP = 600


@dataclass(frozen=True, eq=False)
class FirstOrderRealization:
    A: np.ndarray
    E1: np.ndarray
    H1: np.ndarray

    def transfer(self, s):
        N = self.A.shape[0]
        return self.H1 @ la.solve(s * np.eye(N) - self.A, self.E1)


@dataclass(frozen=True, order=True)
class H2Value:
    """H2 norm with a stability flag; unstable systems carry ``value = inf``."""

    value: float
    stable: bool = True

    def __float__(self):
        return float(self.value)


UNSTABLE = H2Value(np.inf, False)


def linearize(M, C, K, E, H):
    """First-order realization ``x = [q; q']`` of ``M q'' + C q' + K q = E w``.

    ``M`` may be given as a vector (its diagonal) or a dense matrix.
    """
    C = np.asarray(C, dtype=float)
    K = np.asarray(K, dtype=float)
    E = np.asarray(E, dtype=float)
    H = np.atleast_2d(np.asarray(H, dtype=float))
    d = K.shape[0]
    E = E.reshape(d, -1)
    M = np.asarray(M, dtype=float)
    if M.ndim <= 1:
        m = np.broadcast_to(M, (d,))
        if np.any(m == 0) or not np.all(np.isfinite(1.0 / m)):
            raise FactorizationError('mass matrix is singular')
        MinvK, MinvC, MinvE = K / m[:, None], C / m[:, None], E / m[:, None]
    else:
        try:
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', la.LinAlgWarning)
                lu = la.lu_factor(M, check_finite=True)
        except (ValueError, la.LinAlgError) as exc:
            raise FactorizationError(str(exc)) from exc
        if np.any(np.abs(np.diag(lu[0])) <= 1e-14 * np.abs(M).max()):
            raise FactorizationError('mass matrix is singular')
        MinvK, MinvC, MinvE = (la.lu_solve(lu, X) for X in (K, C, E))
    A = np.block([[np.zeros((d, d)), np.eye(d)], [-MinvK, -MinvC]])
    E1 = np.vstack([np.zeros_like(MinvE), MinvE])
    H1 = np.hstack([H, np.zeros((H.shape[0], d))])
    return FirstOrderRealization(A, E1, H1)


def h2_norm(fo):
    """H2 norm of a first-order realization; instability gives ``UNSTABLE``."""
    try:
        X = lyap_solve(fo.A, fo.H1.T @ fo.H1)
    except StabilityError:
        return UNSTABLE
    val = np.trace(fo.E1.T @ X @ fo.E1)
    return H2Value(float(np.sqrt(max(val, 0.0))), True)


def full_order_objective(sys, cap=DEFAULT_ORACLE_CAP):
    """Callable ``g -> H2Value`` at full order, with ``C_int`` formed once."""
    if sys.n > cap:
        raise OracleCapError(f'n={sys.n} exceeds oracle cap {cap}; use the reduced path')
    C_int = internal_damping(sys)
    K = sys.stiffness.toarray()
    B = sys.damper_geometry

    def objective(g):
        dg = sys.damper_gains(g)
        return h2_norm(linearize(sys.mass, C_int + (B * dg) @ B.T, K,
                                 sys.input_map, sys.output_map))

    return objective


def h2_full_oracle(sys, g, cap=DEFAULT_ORACLE_CAP):
    """Dense full-order H2 norm at gains ``g`` (dimension ``2n``)."""
    if sys.n > cap:
        raise OracleCapError(f'n={sys.n} exceeds oracle cap {cap}; use the reduced path')
    C = damping_matrix(sys, g)
    return h2_norm(linearize(sys.mass, C, sys.stiffness.toarray(),
                             sys.input_map, sys.output_map))
