"""Structure-preserving interpolatory reduction of second-order systems.

One-sided (Galerkin) projection onto the span of shifted solves
``P(sigma_i)^{-1} E b_i`` keeps the reduced mass, damping and stiffness
matrices symmetric and definite. Shifts and tangent directions are updated
IRKA-style: the order-``2 r_hat`` reduced model is internally reduced to
order ``r`` and its poles are mirrored into the right half-plane.

Internal reduction strategies
-----------------------------
``'a'`` / ``'BT'``
    balanced truncation of the first-order linearization
``'b'`` / ``'IRKA1S'``
    one-sided IRKA on the first-order linearization
``'c'`` / ``'DOMPOLES'``
    the ``r`` most dominant poles, closed under conjugation
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .errors import (ContractViolationError, DegenerateInputError, NonConvergenceError,
                     ProjectionDegeneracyError, StabilityError)
from .h2norm import FirstOrderRealization, h2_norm, linearize
from .kernels import gen_eig, lyap_solve, orth
from .modalsolve import ModalSystem, shifted_solve
from .model import SecondOrderSystem, internal_damping

__all__ = [
    'InterpolationData', 'PoleResidueForm', 'ReducedModel', 'Sym2IrkaResult',
    'build_basis', 'initial_interpolation', 'internal_reduce', 'pole_residue', 'project',
    'reflect', 'seed_interpolation', 'select_dominant', 'shift_change', 'sym2irka',
    'STRATEGIES',
]

logger = logging.getLogger(__name__)

STRATEGIES = {'a': 'BT', 'b': 'IRKA1S', 'c': 'DOMPOLES',
              'BT': 'BT', 'IRKA1S': 'IRKA1S', 'DOMPOLES': 'DOMPOLES'}

REFLECT_FLOOR = 1e-8
_CONJ_RTOL = 1e-10


def _strategy(name):
    try:
        return STRATEGIES[name]
    except KeyError:
        raise ContractViolationError(f'unknown internal-reduction strategy {name!r}') from None


# -- interpolation data --------------------------------------------------------

def _conj_partner(shifts):
    shifts = np.asarray(shifts, dtype=complex)
    partner = np.empty(len(shifts), dtype=int)
    for k, s in enumerate(shifts):
        dist = np.abs(shifts - np.conj(s))
        dist[k] = np.inf if s.imag != 0 else 0.0
        j = int(np.argmin(dist))
        if dist[j] > _CONJ_RTOL * max(abs(s), 1e-300):
            raise ContractViolationError(f'shift {s} has no conjugate partner')
        partner[k] = j
    return partner


def _unit_phase(t):
    """Scale ``t`` to unit norm with its largest-magnitude entry real positive."""
    nrm = np.linalg.norm(t)
    if nrm == 0:
        return t
    i = int(np.argmax(np.abs(t)))
    return t * (np.abs(t[i]) / t[i]) / nrm


def _canonical_tangents(shifts, tangents):
    """Normalize tangents; conjugate shifts get exactly conjugate tangents."""
    shifts = np.asarray(shifts, dtype=complex)
    tangents = np.array(tangents, dtype=complex)
    partner = _conj_partner(shifts)
    out = np.empty_like(tangents)
    done = np.zeros(len(shifts), dtype=bool)
    for k in range(len(shifts)):
        if done[k]:
            continue
        j = partner[k]
        if j == k:
            t = _unit_phase(tangents[k])
            out[k] = t.real if np.allclose(t.imag, 0, atol=1e-8) else t
            done[k] = True
            continue
        lead = k if shifts[k].imag > 0 else j
        t = _unit_phase(tangents[lead])
        out[lead] = t
        out[partner[lead]] = t.conj()
        done[k] = done[j] = True
    return out


@dataclass(frozen=True, eq=False)
class InterpolationData:
    """Shifts and right tangent directions, closed under conjugation."""

    shifts: np.ndarray
    tangents: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.shifts, dtype=complex).ravel()
        t = np.asarray(self.tangents, dtype=complex)
        if t.ndim == 1:
            t = t[:, None]
        if t.shape[0] != s.shape[0]:
            raise ContractViolationError('one tangent per shift required')
        object.__setattr__(self, 'shifts', s)
        object.__setattr__(self, 'tangents', t)

    @classmethod
    def create(cls, shifts, tangents):
        """Build with canonical tangent normalization applied."""
        shifts = np.asarray(shifts, dtype=complex).ravel()
        return cls(shifts, _canonical_tangents(shifts, np.atleast_2d(tangents).reshape(len(shifts), -1)))

    @property
    def r(self):
        return self.shifts.shape[0]

    def validate(self):
        partner = _conj_partner(self.shifts)
        if np.any(self.shifts.real <= 0):
            raise ContractViolationError('shifts must lie in the open right half-plane')
        for k, j in enumerate(partner):
            if np.linalg.norm(self.tangents[j] - self.tangents[k].conj()) > 1e-10 * max(
                    np.linalg.norm(self.tangents[k]), 1e-300):
                raise ContractViolationError('tangents are not closed under conjugation')
        return self


def shift_change(old, new):
    """Largest relative move between two shift sets after canonical sorting."""
    old = np.asarray(old, dtype=complex)
    new = np.asarray(new, dtype=complex)
    if old.shape != new.shape:
        return np.inf
    o = old[np.lexsort((old.real, old.imag))]
    n = new[np.lexsort((new.real, new.imag))]
    return float(np.max(np.abs(n - o) / np.abs(o)))


def reflect(mu, floor):
    """``sigma = -mu``; non-positive real parts become ``max(|Re|, floor)``."""
    sigma = -np.asarray(mu, dtype=complex)
    re = sigma.real.copy()
    bad = re <= 0
    re[bad] = np.maximum(np.abs(re[bad]), floor)
    return re + 1j * sigma.imag


# -- reduced models ------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ReducedModel:
    """Projected second-order model, parameterized by gains."""

    X: np.ndarray
    M_r: np.ndarray
    K_r: np.ndarray
    C_int_r: np.ndarray
    B_r: np.ndarray
    gain_map: np.ndarray
    E_r: np.ndarray
    H_r: np.ndarray
    freq_scale: float
    provenance: dict = field(default_factory=dict)

    @property
    def order(self):
        return self.M_r.shape[0]

    def damping(self, g):
        dg = self.gain_map @ np.asarray(g, dtype=float)
        return _sym(self.C_int_r + (self.B_r * dg) @ self.B_r.T)

    def realization(self, g):
        return linearize(self.M_r, self.damping(g), self.K_r, self.E_r, self.H_r)

    def h2(self, g):
        return h2_norm(self.realization(g))

    def transfer(self, s, g, out=None):
        out = self.H_r if out is None else out
        P = s * s * self.M_r + s * self.damping(g) + self.K_r
        return out @ la.solve(P, self.E_r)

    def transfer_derivative(self, s, g, out=None):
        out = self.H_r if out is None else out
        C = self.damping(g)
        P = s * s * self.M_r + s * C + self.K_r
        Y = la.solve(P, self.E_r)
        Z = la.solve(P.T, out.T)
        return -(Z.T @ ((2 * s * self.M_r + C) @ Y))


def _sym(A):
    return 0.5 * (A + A.T)


def project(system, X):
    """One-sided projection ``X^T (.) X`` of a modal or physical system.

    For a :class:`ModalSystem` ``X`` lives in modal coordinates.
    """
    X = np.asarray(X, dtype=float)
    if isinstance(system, ModalSystem):
        w = system.omega
        M_r = _sym(X.T @ X)
        K_r = _sym(X.T @ ((w * w)[:, None] * X))
        C_r = _sym(X.T @ (system.internal[:, None] * X))
        B_r = X.T @ system.B_m
        E_r = X.T @ system.E_m
        H_r = system.H_m @ X
        scale = float(w[-1])
    elif isinstance(system, SecondOrderSystem):
        M_r = _sym(X.T @ (system.mass[:, None] * X))
        K_r = _sym(X.T @ (system.stiffness @ X))
        C_r = _sym(X.T @ internal_damping(system) @ X)
        B_r = X.T @ system.damper_geometry
        E_r = X.T @ system.input_map
        H_r = system.output_map @ X
        scale = float(np.sqrt(np.max(np.abs(la.eigvals(K_r, M_r))))) if X.shape[1] else 1.0
    else:
        raise ContractViolationError(f'cannot project {type(system).__name__}')
    for name, A in (('M_r', M_r), ('K_r', K_r)):
        try:
            la.cholesky(A)
        except la.LinAlgError:
            raise ProjectionDegeneracyError(f'{name} lost positive definiteness') from None
    return ReducedModel(X, M_r, K_r, C_r, B_r, np.array(system.gain_map), E_r, H_r, scale)


@dataclass(frozen=True, eq=False)
class PoleResidueForm:
    """``F(s) = sum_k c_k b_k^T / (s - lambda_k)``; ``c`` and ``b`` hold rows."""

    poles: np.ndarray
    c: np.ndarray
    b: np.ndarray

    def __call__(self, s):
        return (self.c.T / (s - self.poles)) @ self.b


def pole_residue(fo):
    """Pole-residue form of a first-order realization via left/right eigenvectors."""
    if not isinstance(fo, FirstOrderRealization):
        fo = FirstOrderRealization(*fo)
    ep = gen_eig(fo.A, left=True)
    c = (fo.H1 @ ep.right).T
    b = (ep.left.T @ fo.E1)
    return PoleResidueForm(ep.values, c, b)


# -- basis construction --------------------------------------------------------

def build_basis(ms, g, interp, tol=1e-12):
    """Real orthonormal basis spanning the shifted solves ``P(s_i)^{-1} E b_i``.

    Conjugate pairs contribute the real and imaginary parts of one solve.
    """
    partner = _conj_partner(interp.shifts)
    cols = []
    for k, (s, b) in enumerate(zip(interp.shifts, interp.tangents)):
        if s.imag < 0 and partner[k] != k:
            continue
        sigma = s.real if s.imag == 0 else s
        v = shifted_solve(ms, g, sigma, ms.E_m @ b)
        cols.append(v.real)
        if np.iscomplexobj(v) and np.any(v.imag):
            cols.append(v.imag)
    V = np.column_stack(cols)
    nrm = np.linalg.norm(V, axis=0)
    if not np.any(nrm > 0):
        raise DegenerateInputError('all basis candidates vanish')
    V = V[:, nrm > 0] / nrm[nrm > 0]
    return orth(V, tol)


# -- internal reduction --------------------------------------------------------

def _check_stable(fo):
    lam = la.eigvals(fo.A)
    if lam.size and lam.real.max() >= -1e-12 * np.linalg.norm(fo.A):
        raise StabilityError(f'reduced model unstable (max Re {lam.real.max():.3e})')
    return lam


def _sqrt_factor(P):
    w, U = la.eigh(_sym(P))
    return U * np.sqrt(np.clip(w, 0, None))


def balanced_truncation(fo, r):
    """Square-root balanced truncation of a stable realization to order ``<= r``."""
    A, E1, H1 = fo.A, fo.E1, fo.H1
    Lp = _sqrt_factor(lyap_solve(A.T, E1 @ E1.T))
    Lq = _sqrt_factor(lyap_solve(A, H1.T @ H1))
    U, s, Vt = la.svd(Lq.T @ Lp)
    r = min(r, int(np.sum(s > 1e-12 * s[0])))
    Si = 1.0 / np.sqrt(s[:r])
    T = Lp @ Vt[:r].T * Si
    W = Lq @ U[:, :r] * Si
    return FirstOrderRealization(W.T @ A @ T, W.T @ E1, H1 @ T), s


def _split_real(cols, shifts):
    out = []
    partner = _conj_partner(shifts)
    for k, s in enumerate(shifts):
        if s.imag < 0 and partner[k] != k:
            continue
        v = cols[:, k]
        out.append(v.real)
        if np.any(v.imag):
            out.append(v.imag)
    return np.column_stack(out)


def _closed_prefix(shifts, tangents, r):
    """First ``r`` shifts (by modulus), extended by one to keep conjugate pairs."""
    order = np.lexsort((-np.sign(shifts.imag), np.abs(shifts)))
    picked = list(order[:r])
    partner = _conj_partner(shifts)
    for k in list(picked):
        if partner[k] not in picked:
            picked.append(partner[k])
    picked = np.array(picked)
    return shifts[picked], tangents[picked]


def irka_one_sided(fo, r, init, it_max, tol, floor):
    """One-sided (``W = V``) IRKA on a first-order realization.

    Returns the pole-residue form of the last reduced realization; inner
    non-convergence is tolerated.
    """
    A, E1, H1 = fo.A, fo.E1, fo.H1
    N = A.shape[0]
    shifts, tangents = init.shifts, init.tangents
    if len(shifts) > r:
        shifts, tangents = _closed_prefix(shifts, tangents, r)
    elif len(shifts) < r:
        pr = pole_residue(fo)
        extra = reflect(pr.poles, floor)
        new = [k for k in np.argsort(np.abs(extra)) if not np.any(np.isclose(extra[k], shifts))]
        es, et = _closed_prefix(extra[new], pr.b[new], r - len(shifts))
        shifts = np.concatenate([shifts, es])
        tangents = np.vstack([tangents, et])
    interp = InterpolationData.create(shifts, tangents)
    pr = None
    for _ in range(it_max):
        cols = np.column_stack([la.solve(s * np.eye(N) - A, E1 @ b)
                                for s, b in zip(interp.shifts, interp.tangents)])
        V = _split_real(cols, interp.shifts)
        V = orth(V / np.linalg.norm(V, axis=0), 1e-12)
        red = FirstOrderRealization(V.T @ A @ V, V.T @ E1, H1 @ V)
        pr = pole_residue(red)
        new = InterpolationData.create(reflect(pr.poles, floor), pr.b)
        done = shift_change(interp.shifts, new.shifts) < tol
        interp = new
        if done:
            break
    return pr


def select_dominant(poles, dominance, r):
    """Indices of the ``r`` most dominant poles, closed under conjugation.

    Ties break by smaller ``|Im|`` first, then positive imaginary part first.
    At most one extra pole is added to complete a conjugate pair.
    """
    poles = np.asarray(poles, dtype=complex)
    dominance = np.asarray(dominance, dtype=float)
    order = np.lexsort(((poles.imag < 0).astype(int), np.abs(poles.imag), -dominance))
    picked = list(order[:r])
    partner = _conj_partner(poles)
    for k in list(picked):
        if partner[k] not in picked:
            picked.append(int(partner[k]))
    return np.array(picked, dtype=int)


def internal_reduce(rm, g, r, strategy, *, current=None, it_max=40, tol=1e-3, floor=None):
    """Next interpolation data from an order-``r`` reduction of ``rm`` at ``g``."""
    strategy = _strategy(strategy)
    fo = rm.realization(g)
    _check_stable(fo)
    floor = REFLECT_FLOOR * rm.freq_scale if floor is None else floor
    N = fo.A.shape[0]
    if strategy == 'DOMPOLES':
        pr = pole_residue(fo)
        dom = (np.linalg.norm(pr.c, axis=1) * np.linalg.norm(pr.b, axis=1)
               / np.abs(pr.poles.real))
        keep = select_dominant(pr.poles, dom, r)
        poles, tang = pr.poles[keep], pr.b[keep]
    elif r >= N:
        pr = pole_residue(fo)
        poles, tang = pr.poles, pr.b
    elif strategy == 'BT':
        red, _ = balanced_truncation(fo, r)
        pr = pole_residue(red)
        poles, tang = pr.poles, pr.b
    else:
        if current is None:
            raise ContractViolationError('IRKA1S needs the current interpolation data')
        pr = irka_one_sided(fo, r, current, it_max, tol, floor)
        poles, tang = pr.poles, pr.b
    return InterpolationData.create(reflect(poles, floor), tang)


# -- outer iteration -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Sym2IrkaResult:
    """Outcome of one run.

    ``interp`` holds the shifts and tangents the returned basis interpolates
    at; ``next_interp`` is the update computed from that basis.
    """

    X: np.ndarray
    interp: InterpolationData
    next_interp: InterpolationData
    iterations: int
    converged: bool
    history: tuple = ()


def sym2irka(ms, g, r, strategy, init, it_max=40, tol=1e-3, orth_tol=1e-12, max_restarts=2):
    """Iterate basis build, projection and internal reduction until shifts settle.

    Convergence is declared when :func:`shift_change` between consecutive
    shift sets drops below ``tol``. An unstable intermediate model triggers a
    restart from :func:`seed_interpolation`.
    """
    if it_max < 1:
        raise ContractViolationError('it_max must be >= 1')
    strategy = _strategy(strategy)
    init.validate()
    floor = REFLECT_FLOOR * float(ms.omega[-1])
    interp = init
    history = []
    restarts = 0
    it = 0
    while True:
        it += 1
        X = build_basis(ms, g, interp, orth_tol)
        rm = project(ms, X)
        try:
            new = internal_reduce(rm, g, r, strategy, current=interp, it_max=it_max, tol=tol,
                                  floor=floor)
        except StabilityError as exc:
            restarts += 1
            logger.warning('sym2irka restart %d at g=%s: %s', restarts, g, exc)
            if restarts > max_restarts:
                raise NonConvergenceError(
                    f'reduced model unstable after {max_restarts} restarts at g={g}') from exc
            interp = seed_interpolation(ms, 2 * ((r + 1) // 2))
            continue
        change = shift_change(interp.shifts, new.shifts)
        history.append(change)
        logger.debug('sym2irka it %d: shift change %.3e, r_hat=%d', it, change, X.shape[1])
        if change < tol or it >= it_max:
            return Sym2IrkaResult(X, interp, new, it, change < tol, tuple(history))
        interp = new


def seed_interpolation(ms, r):
    """Mirrored modally damped poles of the ``r/2`` lowest modes, with tangents.

    Tangents are dominant right singular vectors of the modal truncation's
    transfer function (no external damping) at each shift.
    """
    if r % 2 or r < 2:
        raise ContractViolationError('r must be a positive even number')
    if r > ms.n:
        raise ContractViolationError(f'r={r} exceeds n={ms.n}')
    a = ms.alpha_c
    w = ms.omega[:r // 2]
    upper = reflect(-(a * w + 1j * w * np.sqrt(1 - a * a)), REFLECT_FLOOR * ms.omega[-1])
    d_full = ms.diag
    tangents = []
    for s in upper:
        d = d_full(s)[:r]
        F = ms.H_m[:, :r] @ (ms.E_m[:r] / d[:, None])
        _, _, Vh = la.svd(F)
        tangents.append(Vh[0].conj())
    shifts = np.concatenate([upper, upper.conj()])
    tang = np.vstack([tangents, np.conj(tangents)])
    return InterpolationData.create(shifts, tang)


def initial_interpolation(ms, r, strategy='c', it_max=40, tol=1e-3, orth_tol=1e-12):
    """Off-line phase: seed shifts, then one run without external damping.

    Returns the :class:`Sym2IrkaResult` of the zero-gain run; its ``interp``
    is the recommended starting data for later runs.
    """
    seed = seed_interpolation(ms, r)
    return sym2irka(ms, np.zeros(ms.p), r, strategy, seed, it_max, tol, orth_tol)
