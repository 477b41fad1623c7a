"""Full-order second-order vibrational systems.

A system is ``M q'' + C(g) q' + K q = E w``, ``z = H q`` with diagonal
mass ``M``, sparse symmetric stiffness ``K``, internal damping given as a
fraction ``alpha_c`` of critical damping and external dampers
``B diag(T g) B^T`` where ``T`` (the gain map) ties damper viscosities to
the optimization parameters ``g``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .errors import ContractViolationError, FactorizationError, InvalidDimensionError

__all__ = [
    'SecondOrderSystem',
    'build_example1',
    'build_example2',
    'check_gains',
    'damping_matrix',
    'internal_damping',
    'read_model',
    'write_model',
    'EX1_PAPER_N',
    'EX2_PAPER_D',
]

EX1_PAPER_N = 1900
EX2_PAPER_D = 1000

_EX1_TAPER = np.array([10., 20., 30., 40., 50., 50., 40., 30., 20., 10.])
_EX2_TAPER = np.arange(1000., 99., -100.)


@dataclass(frozen=True, eq=False)
class SecondOrderSystem:
    """Immutable second-order system with parameterized external damping.

    Attributes
    ----------
    mass
        Diagonal of ``M``, shape ``(n,)``, strictly positive.
    stiffness
        Sparse symmetric positive definite ``K``, shape ``(n, n)``.
    alpha_c
        Internal damping as a fraction of critical damping.
    damper_geometry
        ``B``, shape ``(n, n_dampers)``.
    gain_map
        ``T``, shape ``(n_dampers, p)``; damper viscosities are ``T @ g``.
    gain_bounds
        Shape ``(p, 2)`` with rows ``[g_lo, g_hi]``.
    input_map
        ``E``, shape ``(n, m_in)``.
    output_map
        ``H``, shape ``(m_out, n)``.
    name
        Free-form label carried into reports.
    """

    mass: np.ndarray
    stiffness: sp.csr_matrix
    alpha_c: float
    damper_geometry: np.ndarray
    gain_map: np.ndarray
    gain_bounds: np.ndarray
    input_map: np.ndarray
    output_map: np.ndarray
    name: str = 'custom'
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        mass = np.asarray(self.mass, dtype=float)
        n = mass.shape[0]
        if mass.ndim != 1 or n == 0:
            raise InvalidDimensionError('mass must be a non-empty vector')
        if not np.all(mass > 0):
            raise ContractViolationError('mass entries must be strictly positive')
        K = sp.csr_matrix(self.stiffness, dtype=float)
        if K.shape != (n, n):
            raise InvalidDimensionError(f'stiffness must be {n}x{n}, got {K.shape}')
        if (K - K.T).count_nonzero() and abs(K - K.T).max() > 0:
            raise ContractViolationError('stiffness must be exactly symmetric')
        B = np.atleast_2d(np.asarray(self.damper_geometry, dtype=float))
        T = np.atleast_2d(np.asarray(self.gain_map, dtype=float))
        bounds = np.atleast_2d(np.asarray(self.gain_bounds, dtype=float))
        E = np.asarray(self.input_map, dtype=float).reshape(n, -1)
        H = np.atleast_2d(np.asarray(self.output_map, dtype=float))
        if B.shape[0] != n or T.shape[0] != B.shape[1]:
            raise InvalidDimensionError('damper geometry and gain map are inconsistent')
        if bounds.shape != (T.shape[1], 2):
            raise InvalidDimensionError('gain_bounds must have one [lo, hi] row per gain')
        if np.any(bounds[:, 0] < 0) or np.any(bounds[:, 0] > bounds[:, 1]):
            raise ContractViolationError('gain bounds must satisfy 0 <= lo <= hi')
        if H.shape[1] != n:
            raise InvalidDimensionError('output map must have n columns')
        if not 0 <= self.alpha_c < 1:
            raise ContractViolationError('alpha_c must lie in [0, 1)')
        for name, value in [('mass', mass), ('stiffness', K), ('damper_geometry', B),
                            ('gain_map', T), ('gain_bounds', bounds), ('input_map', E),
                            ('output_map', H)]:
            if isinstance(value, np.ndarray):
                value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'alpha_c', float(self.alpha_c))

    @property
    def n(self):
        return self.mass.shape[0]

    @property
    def p(self):
        """Number of independent gain parameters."""
        return self.gain_map.shape[1]

    @property
    def n_dampers(self):
        return self.damper_geometry.shape[1]

    @property
    def m_in(self):
        return self.input_map.shape[1]

    @property
    def m_out(self):
        return self.output_map.shape[0]

    def damper_gains(self, g):
        """Per-damper viscosities ``T @ g``."""
        return self.gain_map @ check_gains(self, g)

    def scaled_stiffness(self):
        """Dense ``M^{-1/2} K M^{-1/2}``."""
        s = 1.0 / np.sqrt(self.mass)
        return s[:, None] * self.stiffness.toarray() * s[None, :]

    def min_scaled_stiffness_eig(self):
        return la.eigvalsh(self.scaled_stiffness(), subset_by_index=[0, 0])[0]


def check_gains(sys, g, *, enforce_bounds=True):
    """Return ``g`` as a float vector, validating shape and bounds."""
    g = np.atleast_1d(np.asarray(g, dtype=float))
    if g.shape != (sys.p,):
        raise ContractViolationError(f'expected {sys.p} gains, got shape {g.shape}')
    if not np.all(np.isfinite(g)):
        raise ContractViolationError('gains must be finite')
    if enforce_bounds:
        lo, hi = sys.gain_bounds[:, 0], sys.gain_bounds[:, 1]
        if np.any(g < lo) or np.any(g > hi):
            raise ContractViolationError(f'gains {g} outside bounds')
    return g


def internal_damping(sys):
    """Dense ``2 alpha_c M^{1/2} (M^{-1/2} K M^{-1/2})^{1/2} M^{1/2}``."""
    lam, U = la.eigh(sys.scaled_stiffness())
    if lam[0] <= 0:
        raise FactorizationError('stiffness is not positive definite')
    root = (U * np.sqrt(lam)) @ U.T
    m = np.sqrt(sys.mass)
    C = 2.0 * sys.alpha_c * (m[:, None] * root * m[None, :])
    return 0.5 * (C + C.T)


def damping_matrix(sys, g):
    """Dense total damping ``C_int + B G(g) B^T``.

    Oracle facility only: forming ``C_int`` costs a dense eigendecomposition.
    """
    d = sys.damper_gains(g)
    B = sys.damper_geometry
    return internal_damping(sys) + (B * d) @ B.T


def _round_half_up(x):
    return int(np.floor(x + 0.5))


def _scaled(i_paper, n, n_paper):
    return _round_half_up(i_paper * n / n_paper)


def _bounds(p, upper):
    return np.column_stack([np.zeros(p), np.full(p, upper)])


def build_example1(n=EX1_PAPER_N, alpha_c=0.005, j=50, k=850, *, spring=500.0,
                   gain_upper=np.inf):
    """Chain of ``n`` masses with next and next-but-one spring couplings.

    Site indices (excitation block, output taps) are given at the reference
    size 1900 and scaled to ``n``; ``j`` and ``k`` are 1-based damper
    positions in the scaled model. Both dampers of a pair share one gain.
    """
    if n < 20:
        raise InvalidDimensionError('example 1 needs n >= 20')
    if not (1 <= j <= n - 1 and 1 <= k <= n - 1 and j + 1 < k):
        raise InvalidDimensionError(f'invalid damper positions j={j}, k={k} for n={n}')
    i = np.arange(1, n + 1)
    ip = i * EX1_PAPER_N / n
    mass = np.where(ip <= 475, 144.0 - 3.0 / 20.0 * ip, ip / 10.0 + 25.0)

    # k_1 .. k_{n+1}, constant
    kk = np.full(n + 2, float(spring))
    main = 2 * kk[1:n + 1] + 2 * kk[2:n + 2]
    off1 = -kk[2:n + 1]
    off2 = -kk[3:n + 1]
    K = sp.diags([off2, off1, main, off1, off2], [-2, -1, 0, 1, 2], format='csr')

    start = _scaled(471, n, EX1_PAPER_N)
    start = min(max(start, 1), n - 9)
    E = np.zeros((n, 10))
    E[start - 1 + np.arange(10), np.arange(10)] = _EX1_TAPER

    taps = np.array([_scaled(100 * t, n, EX1_PAPER_N) for t in range(1, 19)])
    if len(set(taps)) != 18 or taps.min() < 1 or taps.max() > n:
        raise InvalidDimensionError(f'n={n} too small for 18 distinct output taps')
    H = np.zeros((18, n))
    H[np.arange(18), taps - 1] = 1.0

    B = np.zeros((n, 4))
    for col, idx in enumerate([j, j + 1, k, k + 1]):
        B[idx - 1, col] = 1.0
    T = np.array([[1., 0.], [1., 0.], [0., 1.], [0., 1.]])
    return SecondOrderSystem(mass, K, alpha_c, B, T, _bounds(2, gain_upper), E, H,
                             name='example1', meta={'n': n, 'j': j, 'k': k})


def build_example2(d=EX2_PAPER_D, alpha_c=0.003, j=250, k=1150, *, k1=400.0, k2=100.0,
                   k3=300.0, gain_upper=np.inf):
    """Two rows of ``d`` masses joined to a common end mass (``n = 2d + 1``).

    ``j`` indexes the first row, ``k`` the second; each damper spans five
    masses. Output taps and mass profile are scaled from the reference
    row length 1000.
    """
    if d < 30:
        raise InvalidDimensionError('example 2 needs d >= 30')
    if not (1 <= j and j + 25 <= d and d + 1 <= k and k + 25 <= 2 * d):
        raise InvalidDimensionError(f'damper stencil out of range: j={j}, k={k}, d={d}')
    n = 2 * d + 1
    scale = EX2_PAPER_D / d
    t = np.arange(1, d + 1) * scale
    row1 = np.where(t < 500, 100.0 - t / 10.0, t / 30.0 + 33.0)
    row2 = 100.0 - (t + 1) * 5.0 / 20.0 + (t + 1) ** 2 / 5000.0
    mass = np.concatenate([row1, row2, [100.0]])

    def chain(kv):
        return kv * sp.diags([-np.ones(d - 1), 2 * np.ones(d), -np.ones(d - 1)], [-1, 0, 1])

    kappa1 = sp.csr_matrix(([k1], ([d - 1], [0])), shape=(d, 1))
    kappa2 = sp.csr_matrix(([k2], ([d - 1], [0])), shape=(d, 1))
    K = sp.bmat([[chain(k1), None, -kappa1],
                 [None, chain(k2), -kappa2],
                 [-kappa1.T, -kappa2.T, sp.csr_matrix([[k1 + k2 + k3]])]], format='csr')

    E = np.zeros((n, 21))
    E[np.arange(10), np.arange(10)] = _EX2_TAPER
    E[d + np.arange(10), 10 + np.arange(10)] = _EX2_TAPER
    E[n - 1, 20] = 2000.0

    center = _scaled(500, d, EX2_PAPER_D)
    rows = np.concatenate([center + np.arange(-10, 11), d + center + np.arange(-10, 11)])
    H = np.zeros((42, n))
    H[np.arange(42), rows - 1] = 1.0

    B = np.zeros((n, 4))
    for col, base in enumerate([j, j + 20, k, k + 20]):
        B[base - 1, col] = 1.0
        B[base + 4, col] = -1.0
    return SecondOrderSystem(mass, K, alpha_c, B, np.eye(4), _bounds(4, gain_upper), E, H,
                             name='example2', meta={'d': d, 'j': j, 'k': k})


# -- plain-text matrix files ---------------------------------------------------

def _fmt(v):
    return format(float(v), '.17g')


def _write_coo(path, A):
    A = sp.coo_matrix(A)
    order = np.lexsort((A.col, A.row))
    lines = [f'{A.shape[0]} {A.shape[1]} {A.nnz}']
    lines += [f'{A.row[t] + 1} {A.col[t] + 1} {_fmt(A.data[t])}' for t in order]
    Path(path).write_text('\n'.join(lines) + '\n')


def _read_coo(path):
    lines = Path(path).read_text().split('\n')
    header = lines[0].split()
    if len(header) == 2:
        rows = cols = int(header[0])
        nnz = int(header[1])
    else:
        rows, cols, nnz = map(int, header)
    body = [ln.split() for ln in lines[1:1 + nnz]]
    r = np.array([int(b[0]) - 1 for b in body], dtype=int)
    c = np.array([int(b[1]) - 1 for b in body], dtype=int)
    v = np.array([float(b[2]) for b in body])
    return sp.csr_matrix((v, (r, c)), shape=(rows, cols))


def write_model(sys, directory):
    """Serialize ``sys`` to a directory of plain-text files.

    ``stiffness.txt`` has a ``n nnz`` header followed by 1-based
    ``row col value`` triples; rectangular maps carry ``rows cols nnz``.
    Values are written with 17 significant digits so reading back is exact.
    """
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / 'mass.txt').write_text('\n'.join(_fmt(v) for v in sys.mass) + '\n')
    K = sp.coo_matrix(sys.stiffness)
    order = np.lexsort((K.col, K.row))
    lines = [f'{sys.n} {K.nnz}']
    lines += [f'{K.row[t] + 1} {K.col[t] + 1} {_fmt(K.data[t])}' for t in order]
    (d / 'stiffness.txt').write_text('\n'.join(lines) + '\n')
    _write_coo(d / 'damper.txt', sys.damper_geometry)
    _write_coo(d / 'input.txt', sys.input_map)
    _write_coo(d / 'output.txt', sys.output_map)
    meta = {
        'name': sys.name,
        'alpha_c': _fmt(sys.alpha_c),
        'gain_map': [[_fmt(v) for v in row] for row in sys.gain_map],
        'gain_bounds': [[_fmt(v) for v in row] for row in sys.gain_bounds],
        'meta': sys.meta,
    }
    (d / 'model.json').write_text(json.dumps(meta, indent=2, sort_keys=True) + '\n')
    return d


def read_model(directory):
    """Inverse of :func:`write_model`."""
    d = Path(directory)
    meta = json.loads((d / 'model.json').read_text())
    mass = np.array([float(v) for v in (d / 'mass.txt').read_text().split()])
    return SecondOrderSystem(
        mass,
        _read_coo(d / 'stiffness.txt'),
        float(meta['alpha_c']),
        _read_coo(d / 'damper.txt').toarray(),
        np.array([[float(v) for v in row] for row in meta['gain_map']]),
        np.array([[float(v) for v in row] for row in meta['gain_bounds']]),
        _read_coo(d / 'input.txt').toarray(),
        _read_coo(d / 'output.txt').toarray(),
        name=meta.get('name', 'custom'),
        meta=meta.get('meta', {}),
    )
