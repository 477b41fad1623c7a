"""Command-line entry point: ``h2damp {generate,optimize,sweep,h2}``.

Settings resolve in order: preset, config file (``--config`` or the
``H2DAMP_CONFIG`` environment variable), then individual flags.

Exit codes: 0 success, 1 other runtime failure, 2 validation failure,
3 non-convergence, 4 oracle-cap refusal.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import CONFIG_ENV, RunConfig, load_config, parse_items, preset
from .errors import (ContractViolationError, H2DampError, NonConvergenceError,
                     OracleCapError)
from .h2norm import full_order_objective
from .model import check_gains, write_model
from .modalsolve import to_modal
from .pmor import (OptimizerSettings, build_surrogate, optimize_adaptive, optimize_full,
                   optimize_predetermined)

__all__ = ['SWEEP_HEADER', 'main', 'run_config', 'sweep_rows']

EXIT_OK, EXIT_FAIL, EXIT_VALIDATION, EXIT_NONCONV, EXIT_CAP = 0, 1, 2, 3, 4

SWEEP_HEADER = ('j', 'k', 'gains', 'surrogate_h2', 'full_h2', 'oracle_gains', 'oracle_h2',
                'rel_gain_error', 'rel_h2_error', 'reduced_dim', 'converged', 'status',
                't_reduced', 't_oracle')

logger = logging.getLogger('h2damp')


def _num(x):
    if x is None:
        return ''
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), '.17g')


def _vec_text(v):
    return '' if v is None else ' '.join(_num(float(x)) for x in v)


def _settings(cfg):
    return OptimizerSettings(tuple(cfg.x0), cfg.tol_x, cfg.tol_f, cfg.max_evals)


def _oracle_guard(cfg, sys_):
    if cfg.with_oracle and sys_.n > cfg.oracle_cap:
        raise OracleCapError(f'n={sys_.n} exceeds oracle cap {cfg.oracle_cap}; '
                             'raise --oracle-cap to force the full-order oracle')


def run_config(cfg, sys_=None, ms=None):
    """Reduced-path optimization for one configuration; returns the report."""
    sys_ = cfg.build_model() if sys_ is None else sys_
    _oracle_guard(cfg, sys_)
    ms = to_modal(sys_) if ms is None else ms
    oracle = full_order_objective(sys_, cfg.oracle_cap) if cfg.with_oracle else None
    common = dict(it_max=cfg.it_max, tol=cfg.tol, oracle=oracle)
    if cfg.mode == 'predetermined':
        return optimize_predetermined(ms, cfg.samples, cfg.r, cfg.strategy, _settings(cfg),
                                      **common)
    g0 = cfg.g0 if cfg.g0 is not None else (0.0,) * sys_.p
    return optimize_adaptive(ms, g0, cfg.r, cfg.strategy, cfg.tol_diff, _settings(cfg),
                             extra_samples=cfg.extra_samples, max_outer=cfg.max_outer,
                             **common)


def _sweep_row(args):
    cfg, j, k = args
    row = dict.fromkeys(SWEEP_HEADER)
    row.update(j=j, k=k, status='ok')
    try:
        sys_ = cfg.build_model(j, k)
        t = time.perf_counter()
        rep = run_config(cfg, sys_)
        row['t_reduced'] = time.perf_counter() - t
        row.update(gains=rep.gains, surrogate_h2=rep.surrogate_h2, full_h2=rep.full_h2,
                   reduced_dim=rep.reduced_dim, converged=rep.converged)
        if cfg.with_oracle:
            t = time.perf_counter()
            nm = optimize_full(sys_, _settings(cfg), cap=cfg.oracle_cap)
            row['t_oracle'] = time.perf_counter() - t
            g_or = np.clip(nm.x, sys_.gain_bounds[:, 0], sys_.gain_bounds[:, 1])
            f_or = float(nm.fun)
            row.update(oracle_gains=list(g_or), oracle_h2=f_or)
            row['rel_gain_error'] = float(np.linalg.norm(np.asarray(rep.gains) - g_or)
                                          / np.linalg.norm(g_or))
            row['rel_h2_error'] = abs(rep.full_h2 - f_or) / f_or
    except H2DampError as exc:
        row['status'] = f'{type(exc).__name__}: {exc}'
    return row


def sweep_rows(cfg, workers=None):
    """Evaluate every grid point; failures are recorded per row."""
    grid = list(cfg.grid) if cfg.grid else [cfg.positions()]
    jobs = [(cfg, int(j), int(k)) for j, k in grid]
    workers = cfg.workers if workers is None else workers
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_sweep_row, jobs))
    return [_sweep_row(job) for job in jobs]


def sweep_summary(rows):
    ok = [r for r in rows if r['status'] == 'ok']
    summary = {'rows': len(rows), 'failed': len(rows) - len(ok)}
    for key in ('rel_gain_error', 'rel_h2_error'):
        vals = [r[key] for r in ok if r[key] is not None]
        summary[f'mean_{key}'] = float(np.mean(vals)) if vals else None
        summary[f'max_{key}'] = float(np.max(vals)) if vals else None
    dims = [r['reduced_dim'] for r in ok]
    summary['mean_reduced_dim'] = float(np.mean(dims)) if dims else None
    ratios = [r['t_oracle'] / r['t_reduced'] for r in ok if r['t_oracle'] is not None]
    timings = {'mean_time_ratio': float(np.mean(ratios)) if ratios else None,
               'total_reduced': float(sum(r['t_reduced'] for r in ok))}
    return summary, timings


def write_sweep_csv(rows, path):
    with open(path, 'w', newline='') as fh:
        w = csv.writer(fh, lineterminator='\n')
        w.writerow(SWEEP_HEADER)
        for r in rows:
            w.writerow([_vec_text(r[c]) if c in ('gains', 'oracle_gains')
                        else r[c] if c == 'status' else _num(r[c]) for c in SWEEP_HEADER])


def _dump(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True) + '\n'
    if path:
        Path(path).write_text(text)
    return text


# --- argument handling -------------------------------------------------------

_FLAG_FIELDS = [f.name for f in dataclasses.fields(RunConfig) if f.name != 'with_oracle']


def _add_common(p):
    p.add_argument('--preset', help='named preset (ex1-paper, ex1-desk, ex2-paper, ex2-desk)')
    p.add_argument('--config', help=f'config file (default: ${CONFIG_ENV})')
    for name in _FLAG_FIELDS:
        p.add_argument('--' + name.replace('_', '-'), dest=name, metavar='VALUE')
    p.add_argument('--with-oracle', dest='with_oracle', action='store_true', default=None,
                   help='also evaluate the dense full-order oracle')
    p.add_argument('--no-oracle', dest='with_oracle', action='store_false')
    p.add_argument('--timings', help='write per-phase wall times to this JSON file')
    p.add_argument('-v', '--verbose', action='store_true')


def build_parser():
    parser = argparse.ArgumentParser(prog='h2damp', description=__doc__.split('\n')[0])
    sub = parser.add_subparsers(dest='command', required=True)
    p = sub.add_parser('generate', help='write model matrices to a directory')
    _add_common(p)
    p.add_argument('--out', required=True, help='output directory')
    p = sub.add_parser('optimize', help='optimize gains for one configuration')
    _add_common(p)
    p = sub.add_parser('sweep', help='optimize over a grid of damper positions')
    _add_common(p)
    p = sub.add_parser('h2', help='evaluate H2 norms at given gains')
    _add_common(p)
    p.add_argument('--gains', required=True, help='comma-separated gain vector')
    p.add_argument('--surrogate', action='store_true',
                   help='also evaluate the surrogate built from the configured samples')
    return parser


def resolve_config(args):
    base = preset(args.preset) if args.preset else None
    path = args.config or os.environ.get(CONFIG_ENV)
    if path:
        base = load_config(path, base)
    if base is None:
        base = preset('ex1-desk')
    items = [(name, getattr(args, name)) for name in _FLAG_FIELDS
             if getattr(args, name, None) is not None]
    cfg = parse_items(items, base)
    if args.with_oracle is not None:
        cfg = cfg.replace(with_oracle=args.with_oracle)
    return cfg.validate()


def _cmd_generate(cfg, args):
    sys_ = cfg.build_model()
    write_model(sys_, args.out)
    print(_dump({'name': sys_.name, 'n': sys_.n, 'p': sys_.p, 'out': str(args.out)}), end='')
    return EXIT_OK


def _cmd_optimize(cfg, args):
    rep = run_config(cfg)
    print(_dump(rep.to_dict(), cfg.out_json), end='')
    if args.timings:
        _dump(rep.timings, args.timings)
    return EXIT_OK if rep.converged else EXIT_NONCONV


def _cmd_sweep(cfg, args):
    rows = sweep_rows(cfg)
    if cfg.out_csv:
        write_sweep_csv(rows, cfg.out_csv)
    else:
        write_sweep_csv(rows, '/dev/stdout')
    summary, timings = sweep_summary(rows)
    out = _dump(summary, cfg.out_json)
    if cfg.out_csv:
        print(out, end='')
    if args.timings:
        _dump(timings, args.timings)
    return EXIT_OK


def _h2_entry(v):
    return {'value': float(v.value) if v.stable else None,
            'status': 'stable' if v.stable else 'unstable'}


def _cmd_h2(cfg, args):
    sys_ = cfg.build_model()
    g = check_gains(sys_, [float(x) for x in args.gains.split(',')])
    out = {'gains': [float(x) for x in g]}
    if cfg.with_oracle:
        _oracle_guard(cfg, sys_)
        out['oracle'] = _h2_entry(full_order_objective(sys_, cfg.oracle_cap)(g))
    if args.surrogate:
        ms = to_modal(sys_)
        sur = build_surrogate(ms, cfg.samples, cfg.r, cfg.strategy, it_max=cfg.it_max,
                              tol=cfg.tol)
        out['surrogate'] = {**_h2_entry(sur.model.h2(g)), 'reduced_dim': sur.basis.R}
    print(_dump(out, cfg.out_json), end='')
    return EXIT_OK


_COMMANDS = {'generate': _cmd_generate, 'optimize': _cmd_optimize, 'sweep': _cmd_sweep,
             'h2': _cmd_h2}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format='%(levelname)s %(name)s: %(message)s', stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        return _COMMANDS[args.command](cfg, args)
    except OracleCapError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_CAP
    except NonConvergenceError as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_NONCONV
    except (ContractViolationError, ValueError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_VALIDATION
    except (H2DampError, OSError) as exc:
        print(f'error: {exc}', file=sys.stderr)
        return EXIT_FAIL


if __name__ == '__main__':
    sys.exit(main())
