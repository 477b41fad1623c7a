import numpy as np
import pytest

from h2damp.errors import ContractViolationError, NonConvergenceError, OracleCapError
from h2damp.h2norm import full_order_objective
from h2damp.model import build_example1
from h2damp.modalsolve import to_modal
from h2damp.pmor import (OptimizerSettings, aggregate, build_surrogate, greedy_deviation,
                         optimize_adaptive, optimize_predetermined, optimize_surrogate,
                         require_converged)
from h2damp.sym2irka import project

EX1_SAMPLES = [(0.0, 0.0), (1000.0, 1000.0), (100.0, 1000.0), (1000.0, 100.0)]


@pytest.fixture(scope='module')
def tiny():
    s = build_example1(20, 0.005, 2, 10)
    return s, to_modal(s)


def _proj(X):
    return X @ X.T


def test_aggregate_single(rng):
    V, _ = np.linalg.qr(rng.standard_normal((30, 5)))
    agg = aggregate([V], gains=[(1.0, 2.0)])
    assert agg.R == 5 and np.linalg.norm(_proj(agg.X) - _proj(V)) <= 1e-12
    assert agg.contributors[0][1] == 5


def test_aggregate_duplicate(rng):
    V = rng.standard_normal((30, 4))
    assert aggregate([V, V]).R == 4


def test_aggregate_errors(rng):
    with pytest.raises(ContractViolationError):
        aggregate([])
    with pytest.raises(ContractViolationError):
        aggregate([np.ones((3, 1)), np.ones((4, 1))])


def test_aggregate_monotone(rng):
    V1, V2 = rng.standard_normal((40, 6)), rng.standard_normal((40, 5))
    X = aggregate([V1]).X
    Xp = aggregate([V1, V2]).X
    gap = np.linalg.eigvalsh(_proj(Xp) - _proj(X)).min()
    assert gap >= -1e-12 and aggregate([V1, V2]).R <= 11
    assert np.allclose(Xp.T @ Xp, np.eye(Xp.shape[1]), atol=1e-12)


def test_four_samples_width(ms1_300):
    sur = build_surrogate(ms1_300, EX1_SAMPLES, 12, 'c')
    assert sur.basis.R <= 48 and len(sur.iterations) == 5


def test_single_sample_pipeline_identity(ms1_small):
    st = OptimizerSettings((1000.0, 1000.0))
    rep = optimize_predetermined(ms1_small, [(1000.0, 1000.0)], 8, 'c', st)
    sur = build_surrogate(ms1_small, [(1000.0, 1000.0)], 8, 'c')
    nm = optimize_surrogate(sur.model, ms1_small.gain_bounds, st)
    assert np.allclose(rep.gains, np.clip(nm.x, 0, None), rtol=0, atol=0)
    assert rep.reduced_dim == sur.basis.R


def test_predetermined_requires_sample(ms1_small):
    with pytest.raises(ContractViolationError):
        optimize_predetermined(ms1_small, [], 8, 'c', OptimizerSettings((1.0, 1.0)))


def test_predetermined_report(ms1_small):
    rep = optimize_predetermined(ms1_small, EX1_SAMPLES, 8, 'a', OptimizerSettings((1000.0, 1000.0)))
    assert rep.mode == 'predetermined' and rep.samples == [list(g) for g in EX1_SAMPLES]
    assert np.all(np.asarray(rep.gains) >= 0) and np.isfinite(rep.surrogate_h2)
    assert set(rep.timings) >= {'offline', 'samples', 'optimizer', 'total'}
    assert 'timings' not in rep.to_dict()


def test_adaptive_exact_surrogate(tiny):
    s, ms = tiny
    st = OptimizerSettings((1000.0, 1000.0))
    rep = optimize_adaptive(ms, (0.0, 0.0), s.n, 'c', 1e-3, st)
    assert rep.reduced_dim == s.n
    assert rep.converged and rep.outer_iterations == 2
    a, b = rep.gain_history
    assert np.max(np.abs(np.subtract(a, b))) < 1e-3


def test_adaptive_cap_flagged(ms1_small):
    st = OptimizerSettings((1000.0, 1000.0))
    rep = optimize_adaptive(ms1_small, (0.0, 0.0), 4, 'c', 1e-12, st, max_outer=2)
    assert not rep.converged and rep.outer_iterations == 2
    assert rep.gains in rep.gain_history
    with pytest.raises(NonConvergenceError):
        require_converged(rep)


def test_adaptive_extra_samples(ms1_small):
    st = OptimizerSettings((1000.0, 1000.0))
    rep = optimize_adaptive(ms1_small, (0.0, 0.0), 8, 'b', 1e-2, st,
                            extra_samples=[(1000.0, 1000.0)], max_outer=3)
    assert rep.samples[:2] == [[0.0, 0.0], [1000.0, 1000.0]]


def test_deterministic(ms1_small):
    st = OptimizerSettings((1000.0, 1000.0))
    a = optimize_adaptive(ms1_small, (0.0, 0.0), 8, 'c', 1e-3, st, max_outer=3).to_dict()
    b = optimize_adaptive(ms1_small, (0.0, 0.0), 8, 'c', 1e-3, st, max_outer=3).to_dict()
    assert a == b


def test_greedy_single_candidate(ex1_small, ms1_small):
    sur = build_surrogate(ms1_small, [(0.0, 0.0)], 8, 'c')
    g, dev = greedy_deviation(ex1_small, sur.basis, [(500.0, 500.0)], ms=ms1_small)
    full = full_order_objective(ex1_small)((500.0, 500.0)).value
    assert np.array_equal(g, [500.0, 500.0])
    assert dev == pytest.approx(abs(full - sur.model.h2((500.0, 500.0)).value))


def test_greedy_exact(tiny):
    s, ms = tiny
    agg = aggregate([np.eye(s.n)])
    cands = [(0.0, 0.0), (100.0, 5.0), (3000.0, 200.0)]
    _, dev = greedy_deviation(s, agg, cands, ms=ms)
    full = full_order_objective(s)
    assert dev <= 1e-9 * min(full(g).value for g in cands)


def test_greedy_picks_largest(ex1_small, ms1_small):
    sur = build_surrogate(ms1_small, [(0.0, 0.0)], 4, 'c')
    cands = [(0.0, 0.0), (2000.0, 2000.0), (50.0, 10.0)]
    g, dev = greedy_deviation(ex1_small, sur.basis, cands, ms=ms1_small)
    full = full_order_objective(ex1_small)
    devs = [abs(full(c).value - sur.model.h2(c).value) for c in cands]
    assert dev == max(devs) and tuple(g) == cands[int(np.argmax(devs))]


def test_greedy_cap(ex1_small, ms1_small):
    agg = aggregate([np.eye(ex1_small.n)[:, :4]])
    with pytest.raises(OracleCapError):
        greedy_deviation(ex1_small, agg, [(0.0, 0.0)], ms=ms1_small, cap=10)
