import numpy as np
import pytest

from h2damp.errors import ContractViolationError, ProjectionDegeneracyError, StabilityError
from h2damp.h2norm import linearize
from h2damp.modalsolve import shifted_solve, to_modal, transfer_derivative, transfer_eval
from h2damp.sym2irka import (InterpolationData, build_basis, initial_interpolation,
                             internal_reduce, pole_residue, project, reflect,
                             seed_interpolation, select_dominant, shift_change, sym2irka)

from conftest import random_system, tiny_system


def _closed_rhp(interp):
    s = interp.shifts
    assert np.all(s.real > 0)
    assert np.allclose(np.sort_complex(s), np.sort_complex(s.conj()), rtol=1e-10)
    interp.validate()


@pytest.fixture(scope='module')
def offline12(ms1_300):
    return initial_interpolation(ms1_300, 12, 'c')


def test_conjugate_pair_basis(ms1_small):
    b = np.array([1.0 + 0.5j] + [0.2] * (ms1_small.m_in - 1))
    s = 0.2 + 3.0j
    interp = InterpolationData([s, s.conjugate()], [b, b.conj()])
    X = build_basis(ms1_small, [10.0, 5.0], interp)
    v = shifted_solve(ms1_small, [10.0, 5.0], s, ms1_small.E_m @ b)
    V = np.column_stack([v.real, v.imag])
    assert X.shape[1] == 2 and np.isrealobj(X)
    assert np.linalg.norm(X @ X.T @ V - V) <= 1e-12 * np.linalg.norm(V)


def test_real_shift_basis(ms1_small):
    b = np.ones(ms1_small.m_in)
    X = build_basis(ms1_small, [1.0, 1.0], InterpolationData([2.0 + 0j], [b]))
    v = shifted_solve(ms1_small, [1.0, 1.0], 2.0, ms1_small.E_m @ b).real
    assert np.allclose(np.abs(X[:, 0]), np.abs(v / np.linalg.norm(v)), atol=1e-14)


def test_identity_projection(ms1_small):
    rm = project(ms1_small, np.eye(ms1_small.n))
    g = [50.0, 20.0]
    s = 0.4 + 1.5j
    assert np.allclose(rm.transfer(s, g), transfer_eval(ms1_small, g, s), rtol=1e-11)


def test_single_mode_projection(ms1_small):
    rm = project(ms1_small, np.eye(ms1_small.n)[:, :1])
    assert rm.M_r[0, 0] == pytest.approx(1.0) and rm.K_r[0, 0] == pytest.approx(
        ms1_small.omega[0] ** 2)


def test_random_projection_spd(ms1_300, rng):
    for _ in range(20):
        X, _ = np.linalg.qr(rng.standard_normal((ms1_300.n, 16)))
        rm = project(ms1_300, X)
        assert np.linalg.eigvalsh(rm.M_r).min() > 0 and np.linalg.eigvalsh(rm.K_r).min() > 0
        C = rm.damping([300.0, 800.0])
        assert np.array_equal(C, C.T)


def test_projection_degeneracy(ms1_small):
    with pytest.raises(ProjectionDegeneracyError):
        project(ms1_small, np.zeros((ms1_small.n, 1)))


def test_physical_projection_matches_modal(ex1_small, ms1_small):
    X = ms1_small.phi[:, :5]
    rm_phys = project(ex1_small, X)
    rm_modal = project(ms1_small, np.eye(ex1_small.n)[:, :5])
    s, g = 0.3 + 2j, [20.0, 70.0]
    assert np.allclose(rm_phys.transfer(s, g), rm_modal.transfer(s, g), rtol=1e-9)


def test_pole_residue_first_order():
    pr = pole_residue((np.array([[-1.0]]), np.ones((1, 1)), np.ones((1, 1))))
    assert pr.poles[0] == pytest.approx(-1) and (pr.c.T @ pr.b)[0, 0] == pytest.approx(1)


def test_pole_residue_partial_fractions():
    fo = linearize(1.0, np.array([[3.0]]), np.array([[2.0]]), np.ones(1), np.ones(1))
    pr = pole_residue(fo)
    res = {round(p.real): (c[0] * b[0]).real for p, c, b in zip(pr.poles, pr.c, pr.b)}
    assert res[-1] == pytest.approx(1) and res[-2] == pytest.approx(-1)


def test_pole_residue_reconstruction(rng):
    s = random_system(rng, 10, m_in=2, m_out=2)
    fo = linearize(s.mass, np.eye(10) * 5.0, s.stiffness.toarray(), s.input_map, s.output_map)
    pr = pole_residue(fo)
    for z in rng.uniform(-1, 1, 7) + 1j * rng.uniform(-20, 20, 7):
        ref = fo.transfer(z)
        assert np.linalg.norm(pr(z) - ref) <= 1e-8 * np.linalg.norm(ref)


def test_bt_without_truncation(ms1_small):
    X = np.eye(ms1_small.n)[:, :4]
    rm = project(ms1_small, X)
    nxt = internal_reduce(rm, [10.0, 10.0], 8, 'a')
    lam = np.linalg.eigvals(rm.realization([10.0, 10.0]).A)
    assert np.allclose(np.sort_complex(nxt.shifts), np.sort_complex(-lam), rtol=1e-12)


def test_dominance_ordering():
    poles = np.array([-1 + 5j, -1 - 5j, -1 + 2j, -1 - 2j, -1 + 9j, -1 - 9j])
    dom = np.array([10, 10, 1, 1, 0.1, 0.1])
    assert sorted(select_dominant(poles, dom, 2).tolist()) == [0, 1]
    # a single slot still yields a conjugate-closed pair
    assert sorted(select_dominant(poles, dom, 1).tolist()) == [0, 1]


def test_dominance_tie_break():
    poles = np.array([-1 + 5j, -1 - 5j, -1 + 2j, -1 - 2j])
    assert sorted(select_dominant(poles, np.ones(4), 2).tolist()) == [2, 3]


@pytest.mark.parametrize('strategy', ['a', 'b', 'c'])
def test_internal_reduce_invariants(ms1_300, offline12, strategy):
    rm = project(ms1_300, offline12.X)
    nxt = internal_reduce(rm, [500.0, 500.0], 12, strategy, current=offline12.interp)
    _closed_rhp(nxt)


def test_internal_reduce_unstable():
    ms = to_modal(tiny_system())
    rm = project(ms, np.eye(1))
    with pytest.raises(StabilityError):
        internal_reduce(rm, [0.0], 2, 'c')


def test_reflect_floor():
    out = reflect(np.array([2.0 + 1j, -3.0, 0.0 + 4j]), 1e-3)
    assert np.allclose(out, [2.0 - 1j, 3.0, 1e-3 - 4j])


def test_shift_change_permutation():
    a = np.array([1 + 2j, 1 - 2j, 3 + 0j])
    assert shift_change(a, a[::-1]) == 0
    assert shift_change(a, a[:2]) == np.inf


def test_seed_limit_zero_damping():
    import scipy.sparse as sp
    from h2damp.model import SecondOrderSystem
    s = SecondOrderSystem(np.ones(4), sp.diags([1.0, 4.0, 9.0, 16.0]).tocsr(), 0.0,
                          np.eye(4)[:, :1], np.eye(1), [[0, np.inf]], np.ones((4, 1)),
                          np.ones((1, 4)))
    ms = to_modal(s)
    seed = seed_interpolation(ms, 4)
    floor = 1e-8 * ms.omega[-1]
    assert np.allclose(seed.shifts.real, floor)
    assert np.allclose(np.sort(np.abs(seed.shifts.imag)), [1, 1, 2, 2])
    assert np.allclose(seed.tangents, 1)


def test_seed_invalid(ms1_small):
    with pytest.raises(ContractViolationError):
        seed_interpolation(ms1_small, 3)
    with pytest.raises(ContractViolationError):
        seed_interpolation(ms1_small, ms1_small.n + 2)


def test_offline_invariants(offline12):
    _closed_rhp(offline12.interp)
    _closed_rhp(offline12.next_interp)
    assert offline12.iterations <= 40


def test_single_pass(ms1_300, offline12):
    res = sym2irka(ms1_300, [400.0, 400.0], 12, 'c', offline12.interp, it_max=1)
    assert res.iterations == 1
    X = build_basis(ms1_300, [400.0, 400.0], offline12.interp)
    assert np.array_equal(res.X, X)


def test_idempotent_restart(ms1_300):
    res = sym2irka(ms1_300, [200.0, 600.0], 12, 'b', initial_interpolation(ms1_300, 12, 'b').interp)
    assert res.converged
    again = sym2irka(ms1_300, [200.0, 600.0], 12, 'b', res.next_interp)
    assert again.iterations == 1


@pytest.mark.parametrize('strategy', ['a', 'b', 'c'])
def test_tangential_interpolation(ms1_300, offline12, strategy):
    g = np.array([300.0, 900.0])
    res = sym2irka(ms1_300, g, 12, strategy, offline12.interp)
    rm = project(ms1_300, res.X)
    assert np.isrealobj(res.X)
    for s, b in zip(res.interp.shifts, res.interp.tangents):
        Fb = transfer_eval(ms1_300, g, s) @ b
        Frb = rm.transfer(s, g) @ b
        assert np.linalg.norm(Fb - Frb) <= 1e-8 * np.linalg.norm(Fb)
        Et = ms1_300.E_m.T
        d = b @ transfer_derivative(ms1_300, g, s, out=Et) @ b
        dr = b @ rm.transfer_derivative(s, g, out=rm.E_r.T) @ b
        assert abs(d - dr) <= 1e-6 * abs(d)
