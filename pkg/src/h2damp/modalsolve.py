"""Modal coordinates and fast shifted quadratic solves.

With ``Phi^T M Phi = I`` and ``Phi^T K Phi = Omega^2`` the internal damping
becomes ``2 alpha_c Omega`` and the quadratic pencil at a shift ``s`` is
``D(s) + s Bm G Bm^T`` with ``D(s)`` diagonal. The rank-``p`` gain term is
handled with the Sherman-Morrison-Woodbury identity, so a solve costs
``O(n p^2 + p^3)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import FactorizationError, PoleCollisionError, ShiftDegeneracyError
from .kernels import sym_eig
from .model import check_gains

__all__ = ['ModalSystem', 'shifted_solve', 'to_modal', 'transfer_derivative',
           'transfer_eval']

SMW_COND_MAX = 1e14
SHIFT_NUDGE = 1e-10


@dataclass(frozen=True, eq=False)
class ModalSystem:
    omega: np.ndarray
    alpha_c: float
    B_m: np.ndarray
    E_m: np.ndarray
    H_m: np.ndarray
    gain_map: np.ndarray
    gain_bounds: np.ndarray
    phi: np.ndarray | None = None
    source: object = None

    @property
    def n(self):
        return self.omega.shape[0]

    @property
    def p(self):
        return self.gain_map.shape[1]

    @property
    def m_in(self):
        return self.E_m.shape[1]

    @property
    def m_out(self):
        return self.H_m.shape[0]

    @property
    def internal(self):
        """Diagonal of the modal internal damping, ``2 alpha_c omega``."""
        return 2.0 * self.alpha_c * self.omega

    def damper_gains(self, g):
        g = check_gains(self, g)
        return self.gain_map @ g

    def diag(self, sigma):
        """Diagonal of ``D(sigma) = sigma^2 I + sigma 2 alpha_c Omega + Omega^2``."""
        w = self.omega
        return sigma * sigma + sigma * self.internal + w * w


def to_modal(sys, phi_cap=5000):
    """Simultaneously diagonalize ``M`` and ``K`` of a :class:`SecondOrderSystem`.

    ``Phi`` is kept only when ``n <= phi_cap``. Mode shapes are sign-normalized
    so the largest-magnitude entry of each column is positive.
    """
    s = 1.0 / np.sqrt(sys.mass)
    lam, U = sym_eig(sys.scaled_stiffness())
    if lam[0] <= 0:
        raise FactorizationError(f'stiffness not positive definite (min eig {lam[0]:.3e})')
    idx = np.argmax(np.abs(U), axis=0)
    U = U * np.sign(U[idx, np.arange(U.shape[1])])
    phi = s[:, None] * U
    ms = ModalSystem(
        omega=np.sqrt(lam),
        alpha_c=sys.alpha_c,
        B_m=phi.T @ sys.damper_geometry,
        E_m=phi.T @ sys.input_map,
        H_m=sys.output_map @ phi,
        gain_map=np.array(sys.gain_map),
        gain_bounds=np.array(sys.gain_bounds),
        phi=phi if sys.n <= phi_cap else None,
        source=sys,
    )
    return ms


def _check_poles(ms, sigma, d):
    scale = np.abs(sigma) ** 2 + ms.omega ** 2
    if np.any(np.abs(d) <= 1e-14 * scale):
        raise PoleCollisionError(f'shift {sigma} hits an internal-damping pole')


def shifted_solve(ms, g, sigma, rhs):
    """Solve ``(s^2 I + s (2 alpha_c Omega + Bm G Bm^T) + Omega^2) x = rhs``.

    ``rhs`` is given in modal coordinates, shape ``(n,)`` or ``(n, k)``.
    With all gains zero the result is the plain diagonal solve.
    """
    rhs = np.asarray(rhs)
    d = ms.diag(sigma)
    _check_poles(ms, sigma, d)
    vec = rhs.ndim == 1
    if vec:
        rhs = rhs[:, None]
    dinv_rhs = rhs / d[:, None]
    geff = ms.damper_gains(g)
    if not np.any(geff):
        return dinv_rhs[:, 0] if vec else dinv_rhs

    keep = geff != 0
    Bg = ms.B_m[:, keep] * np.sqrt(geff[keep])
    for attempt in range(2):
        DBg = Bg / d[:, None]
        S = np.eye(Bg.shape[1]) + sigma * (Bg.T @ DBg)
        if np.linalg.cond(S) <= SMW_COND_MAX:
            break
        if attempt == 1:
            raise ShiftDegeneracyError(f'inner SMW system singular at shift {sigma}')
        sigma = sigma * (1 + SHIFT_NUDGE)
        d = ms.diag(sigma)
        _check_poles(ms, sigma, d)
        dinv_rhs = rhs / d[:, None]
    out = dinv_rhs - sigma * (DBg @ la.solve(S, Bg.T @ dinv_rhs))
    return out[:, 0] if vec else out


def transfer_eval(ms, g, sigma):
    """``F(sigma; g) = H_m P(sigma)^{-1} E_m``, shape ``(m_out, m_in)``."""
    return ms.H_m @ shifted_solve(ms, g, sigma, ms.E_m)


def transfer_derivative(ms, g, sigma, out=None):
    """``dF/ds = -out P^{-1} (2 s I + C_m) P^{-1} E_m`` at ``s = sigma``.

    ``out`` defaults to ``H_m``; pass ``E_m.T`` for the collocated transfer
    function.
    """
    out = ms.H_m if out is None else out
    X = shifted_solve(ms, g, sigma, ms.E_m)
    geff = ms.damper_gains(g)
    dP_X = (2 * sigma + ms.internal)[:, None] * X + ms.B_m @ (geff[:, None] * (ms.B_m.T @ X))
    # P(sigma) is complex symmetric, so out P^{-1} = (P^{-1} out^T)^T
    Y = shifted_solve(ms, g, sigma, np.asarray(out).T)
    return -(Y.T @ dP_X)
