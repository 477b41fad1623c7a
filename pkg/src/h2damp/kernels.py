"""Dense linear-algebra primitives for small and medium matrices."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .errors import ContractViolationError, StabilityError

__all__ = ['EigenPairs', 'IllConditionedWarning', 'gen_eig', 'lyap_solve', 'orth',
           'schur_real_parts', 'sym_eig']


class IllConditionedWarning(UserWarning):
    """Spectrum is (nearly) defective; eigenvectors may be inaccurate."""


@dataclass(frozen=True)
class EigenPairs:
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray | None = None


def sym_eig(A):
    """Eigenvalues (ascending) and orthonormal eigenvectors of symmetric ``A``."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolationError('sym_eig needs a square matrix')
    nrm = np.linalg.norm(A)
    if np.linalg.norm(A - A.T) > 1e-12 * max(nrm, np.finfo(float).tiny):
        raise ContractViolationError('sym_eig input is not symmetric')
    return la.eigh(A)


def gen_eig(A, left=False, cond_warn=1e10):
    """Full spectrum of a general square matrix.

    With ``left=True`` the left vectors ``w`` satisfy ``w.T @ A = lam * w.T``
    (plain transpose) and are scaled so that ``w.T @ v = 1``.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolationError('gen_eig needs a square matrix')
    if not left:
        lam, V = la.eig(A)
        return EigenPairs(lam, V)
    lam, VL, V = la.eig(A, left=True, right=True)
    W = VL.conj()
    scal = np.einsum('ij,ij->j', W, V)
    cond = np.linalg.norm(W, axis=0) * np.linalg.norm(V, axis=0) / np.abs(scal)
    if not np.all(np.isfinite(cond)) or cond.max() > cond_warn:
        warnings.warn('eigenvalue condition numbers exceed %.1e' % cond_warn,
                      IllConditionedWarning, stacklevel=2)
    return EigenPairs(lam, V, W / scal)


def orth(columns, tol=1e-12):
    """Orthonormal basis of the numerical range of ``columns``.

    The rank is the number of singular values above ``tol * s_max``.
    """
    if tol < 0:
        raise ContractViolationError('tol must be non-negative')
    A = np.asarray(columns)
    if A.ndim == 1:
        A = A[:, None]
    if A.shape[1] == 0 or not np.any(A):
        return np.zeros((A.shape[0], 0), dtype=A.dtype)
    U, s, _ = la.svd(A, full_matrices=False)
    rank = int(np.sum(s > tol * s[0]))
    return U[:, :rank]


def schur_real_parts(T):
    """Real parts of the eigenvalues of a real quasi-triangular Schur factor."""
    n = T.shape[0]
    out = np.empty(n)
    i = 0
    while i < n:
        if i + 1 < n and T[i + 1, i] != 0.0:
            out[i] = out[i + 1] = 0.5 * (T[i, i] + T[i + 1, i + 1])
            i += 2
        else:
            out[i] = T[i, i]
            i += 1
    return out


def lyap_solve(A, Q, stab_tol=1e-12):
    """Solve ``A.T X + X A = -Q`` for stable ``A`` by Bartels-Stewart.

    Raises :class:`StabilityError` when an eigenvalue of ``A`` has real part
    above ``-stab_tol * ||A||_F``.
    """
    A = np.asarray(A, dtype=float)
    Q = np.asarray(Q, dtype=float)
    n = A.shape[0]
    if A.shape != (n, n) or Q.shape != (n, n):
        raise ContractViolationError('lyap_solve needs square A and Q of equal size')
    if n == 0:
        return np.zeros((0, 0))
    T, Z = la.schur(A, output='real')
    re = schur_real_parts(T)
    if re.max() >= -stab_tol * np.linalg.norm(A):
        raise StabilityError(f'A is not Hurwitz (max real part {re.max():.3e})')
    F = Z.T @ Q @ Z
    trsyl, = la.get_lapack_funcs(('trsyl',), (T,))
    Y, scale, info = trsyl(T, T, -F, trana='T', tranb='N')
    if info < 0:
        raise ContractViolationError(f'trsyl argument error {info}')
    X = Z @ (Y / scale) @ Z.T
    return 0.5 * (X + X.T)
