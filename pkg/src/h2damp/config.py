"""Run configuration, named presets and the flat key=value config format.

Config files are INI-style with one section per concern::

    [model]
    example = ex1
    size = 300
    [sym2irka]
    r = 20
    strategy = c
    [optimizer]
    x0 = 1000, 1000
    [pmor]
    samples = 0,0; 1000,1000

Gain vectors are comma separated; lists of vectors use ``;``.
"""

from __future__ import annotations

import configparser
import dataclasses
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractViolationError
from .model import EX1_PAPER_N, EX2_PAPER_D, build_example1, build_example2, read_model

__all__ = ['PRESETS', 'RunConfig', 'load_config', 'preset', 'scaled_grid']

CONFIG_ENV = 'H2DAMP_CONFIG'

EX1_GRID_J = (50, 150, 250, 350)
EX1_GRID_K = tuple(range(850, 1851, 100))
EX2_GRID_J = (250, 450, 650, 850)
EX2_GRID_K = tuple(range(1150, 1751, 100))
GRIDS = {'ex1': (EX1_GRID_J, EX1_GRID_K), 'ex2': (EX2_GRID_J, EX2_GRID_K)}

EX1_SAMPLES = ((0., 0.), (1000., 1000.), (100., 1000.), (1000., 100.))
EX2_SAMPLES = ((0., 0., 0., 0.), (1000., 1000., 1000., 1000.), (1000., 1000., 4000., 4000.),
               (4000., 4000., 1000., 1000.), (4000., 500., 4000., 500.))


def _half_up(x):
    return int(x + 0.5)


def scaled_grid(example, size, grid_j, grid_k):
    """Map reference damper positions to a model of ``size`` (n or d)."""
    if example == 'ex1':
        n = size
        js = [min(max(_half_up(j * n / EX1_PAPER_N), 1), n - 1) for j in grid_j]
        ks = [min(max(_half_up(k * n / EX1_PAPER_N), 1), n - 1) for k in grid_k]
    elif example == 'ex2':
        d = size
        js = [min(max(_half_up(j * d / EX2_PAPER_D), 1), d - 25) for j in grid_j]
        ks = [min(max(d + _half_up((k - EX2_PAPER_D) * d / EX2_PAPER_D), d + 1), 2 * d - 25)
              for k in grid_k]
    else:
        raise ContractViolationError('grid scaling needs example ex1 or ex2')
    return [(j, k) for j in js for k in ks]


@dataclass(frozen=True)
class RunConfig:
    example: str = 'ex1'
    size: int = 300
    alpha_c: float | None = None
    model_dir: str | None = None
    j: int | None = None
    k: int | None = None
    grid: tuple = ()
    strategy: str = 'c'
    mode: str = 'adaptive'
    r: int = 20
    it_max: int = 40
    tol: float = 1e-3
    tol_diff: float = 1e-3
    max_outer: int = 15
    tol_x: float = 1e-4
    tol_f: float = 1e-4
    max_evals: int | None = None
    x0: tuple = (1000., 1000.)
    g0: tuple | None = None
    samples: tuple = EX1_SAMPLES
    extra_samples: tuple = ()
    with_oracle: bool = True
    oracle_cap: int = 600
    out_json: str | None = None
    out_csv: str | None = None
    seed: int | None = None
    workers: int = 1
    name: str = 'custom'

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    @property
    def p(self):
        return 2 if self.example == 'ex1' else 4 if self.example == 'ex2' else len(self.x0)

    @property
    def n(self):
        return self.size if self.example == 'ex1' else 2 * self.size + 1

    def validate(self):
        """Check every field; raises :class:`ContractViolationError`."""
        def bad(msg):
            raise ContractViolationError(msg)
        if self.example not in ('ex1', 'ex2', 'file'):
            bad(f'unknown example {self.example!r}')
        if self.example == 'file' and not self.model_dir:
            bad('example=file needs model_dir')
        if self.strategy not in ('a', 'b', 'c'):
            bad(f'strategy must be a, b or c, got {self.strategy!r}')
        if self.mode not in ('predetermined', 'adaptive'):
            bad(f'mode must be predetermined or adaptive, got {self.mode!r}')
        if self.r < 2 or self.r % 2:
            bad('r must be a positive even integer')
        if self.example != 'file' and self.r > self.n:
            bad(f'r={self.r} exceeds model size {self.n}')
        if self.it_max < 1 or self.max_outer < 1:
            bad('it_max and max_outer must be >= 1')
        for name in ('tol', 'tol_diff', 'tol_x', 'tol_f'):
            if not getattr(self, name) > 0:
                bad(f'{name} must be positive')
        if self.alpha_c is not None and not 0 <= self.alpha_c < 1:
            bad('alpha_c must lie in [0, 1)')
        p = self.p
        vecs = [self.x0] + list(self.samples) + list(self.extra_samples)
        if self.g0 is not None:
            vecs.append(self.g0)
        for v in vecs:
            if len(v) != p or any(x < 0 for x in v):
                bad(f'gain vector {v} must have {p} non-negative entries')
        if self.mode == 'predetermined' and not self.samples:
            bad('predetermined mode needs samples')
        if self.j is not None and self.k is not None and not self.j < self.k:
            bad('damper positions need j < k')
        if self.oracle_cap < 1 or self.workers < 1:
            bad('oracle_cap and workers must be positive')
        return self

    def positions(self):
        if self.j is not None and self.k is not None:
            return self.j, self.k
        if self.grid:
            return self.grid[0]
        raise ContractViolationError('no damper position configured')

    def build_model(self, j=None, k=None):
        if self.example == 'file':
            return read_model(self.model_dir)
        dj, dk = self.positions()
        j = dj if j is None else j
        k = dk if k is None else k
        if self.example == 'ex1':
            alpha = 0.005 if self.alpha_c is None else self.alpha_c
            return build_example1(self.size, alpha, j, k)
        alpha = 0.003 if self.alpha_c is None else self.alpha_c
        return build_example2(self.size, alpha, j, k)


def _ex1(size, r, oracle, name):
    return RunConfig(example='ex1', size=size, r=r, tol_diff=1e-3, it_max=40, tol=1e-3,
                     tol_x=1e-4, tol_f=1e-4, x0=(1000., 1000.), g0=(0., 0.),
                     samples=EX1_SAMPLES, grid=tuple(scaled_grid('ex1', size, EX1_GRID_J,
                                                                 EX1_GRID_K)),
                     with_oracle=oracle, name=name)


def _ex2(size, r, oracle, name):
    return RunConfig(example='ex2', size=size, r=r, tol_diff=0.05, it_max=40, tol=1e-3,
                     tol_x=5e-4, tol_f=5e-4, x0=(1000.,) * 4, g0=(0.,) * 4,
                     samples=EX2_SAMPLES, extra_samples=((1000.,) * 4,),
                     grid=tuple(scaled_grid('ex2', size, EX2_GRID_J, EX2_GRID_K)),
                     with_oracle=oracle, name=name)


PRESETS = {
    'ex1-paper': _ex1(EX1_PAPER_N, 60, False, 'ex1-paper'),
    'ex1-desk': _ex1(300, 20, True, 'ex1-desk'),
    'ex2-paper': _ex2(EX2_PAPER_D, 120, False, 'ex2-paper'),
    'ex2-desk': _ex2(150, 24, True, 'ex2-desk'),
}


def preset(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ContractViolationError(
            f'unknown preset {name!r}; choose from {sorted(PRESETS)}') from None


def _vec(text):
    return tuple(float(x) for x in text.split(',') if x.strip())


def _vecs(text):
    return tuple(_vec(part) for part in text.split(';') if part.strip())


def _pairs(text):
    return tuple(tuple(int(x) for x in part.split(',')) for part in text.split(';')
                 if part.strip())


def _bool(text):
    return text.strip().lower() in ('1', 'true', 'yes', 'on')


def _opt_int(text):
    return None if text.strip().lower() in ('', 'none') else int(text)


def _opt_float(text):
    return None if text.strip().lower() in ('', 'none') else float(text)


def _opt_str(text):
    return None if text.strip().lower() in ('', 'none') else text.strip()


_PARSERS = {
    'example': str.strip, 'size': int, 'alpha_c': _opt_float, 'model_dir': _opt_str,
    'j': _opt_int, 'k': _opt_int, 'grid': _pairs, 'strategy': str.strip, 'mode': str.strip,
    'r': int, 'it_max': int, 'tol': float, 'tol_diff': float, 'max_outer': int,
    'tol_x': float, 'tol_f': float, 'max_evals': _opt_int, 'x0': _vec, 'g0': _vec,
    'samples': _vecs, 'extra_samples': _vecs, 'with_oracle': _bool, 'oracle_cap': int,
    'out_json': _opt_str, 'out_csv': _opt_str, 'seed': _opt_int, 'workers': int,
    'name': str.strip,
}


def parse_items(items, base=None):
    """Apply ``(key, text)`` pairs to ``base`` (a :class:`RunConfig`)."""
    cfg = RunConfig() if base is None else base
    updates = {}
    for key, text in items:
        key = key.strip().replace('-', '_')
        if key == 'preset':
            continue
        if key not in _PARSERS:
            raise ContractViolationError(f'unknown config key {key!r}')
        try:
            updates[key] = _PARSERS[key](text)
        except ValueError as exc:
            raise ContractViolationError(f'bad value for {key}: {text!r}') from exc
    cfg = cfg.replace(**updates)
    if 'grid' not in updates:
        # explicit positions or a new size invalidate the inherited grid
        if cfg.j is not None and cfg.k is not None and ('j' in updates or 'k' in updates):
            cfg = cfg.replace(grid=((cfg.j, cfg.k),))
        elif 'size' in updates and cfg.example in GRIDS:
            cfg = cfg.replace(grid=tuple(scaled_grid(cfg.example, cfg.size, *GRIDS[cfg.example])))
    return cfg


def load_config(path, base=None):
    """Read a config file; a ``preset`` key in any section selects the base."""
    parser = configparser.ConfigParser()
    text = Path(path).read_text()
    parser.read_string(text if text.lstrip().startswith('[') else '[run]\n' + text)
    items = [(k, v) for sec in parser.sections() for k, v in parser.items(sec)]
    for k, v in items:
        if k == 'preset':
            base = preset(v.strip())
    return parse_items(items, base)


def dump_config(cfg):
    """Flat ``key = value`` text readable by :func:`load_config`."""
    lines = ['[run]']
    for f in dataclasses.fields(cfg):
        v = getattr(cfg, f.name)
        if v is None:
            text = 'none'
        elif f.name in ('samples', 'extra_samples'):
            text = '; '.join(', '.join(repr(x) for x in vec) for vec in v)
        elif f.name == 'grid':
            text = '; '.join(f'{a},{b}' for a, b in v)
        elif isinstance(v, tuple):
            text = ', '.join(repr(x) for x in v)
        else:
            text = str(v)
        lines.append(f'{f.name} = {text}')
    return '\n'.join(lines) + '\n'
