import numpy as np
import pytest
import scipy.linalg as la

from h2damp.errors import FactorizationError, PoleCollisionError
from h2damp.h2norm import linearize
from h2damp.model import damping_matrix, internal_damping
from h2damp.modalsolve import shifted_solve, to_modal, transfer_derivative, transfer_eval

from conftest import random_system, tiny_system


def test_scalar_modal():
    ms = to_modal(tiny_system(m=4.0, k=16.0))
    assert ms.omega[0] == pytest.approx(2.0) and ms.phi[0, 0] == pytest.approx(0.5)


def test_diagonal_stiffness():
    import scipy.sparse as sp
    from h2damp.model import SecondOrderSystem
    s = SecondOrderSystem(np.ones(3), sp.diags([1.0, 9.0, 4.0]).tocsr(), 0.0, np.eye(3)[:, :1],
                          np.eye(1), [[0, np.inf]], np.eye(3), np.eye(3))
    ms = to_modal(s)
    assert np.allclose(ms.omega, [1, 2, 3])
    assert np.allclose(np.abs(ms.phi), np.eye(3)[:, [0, 2, 1]])


def test_modal_invariants(ex1_300, ms1_300):
    s, Phi = ex1_300, ms1_300.phi
    n = s.n
    K = s.stiffness.toarray()
    assert np.linalg.norm(Phi.T @ (s.mass[:, None] * Phi) - np.eye(n)) <= 1e-10 * np.sqrt(n)
    assert (np.linalg.norm(Phi.T @ K @ Phi - np.diag(ms1_300.omega ** 2))
            <= 1e-10 * np.linalg.norm(K))
    assert np.all(np.diff(ms1_300.omega) > 0) and ms1_300.omega[0] > 0
    assert np.allclose(ms1_300.E_m, Phi.T @ s.input_map)


def test_non_spd_stiffness():
    with pytest.raises(FactorizationError):
        to_modal(tiny_system(k=-1.0))


def test_zero_gain_is_diagonal_solve(ms1_small, rng):
    sigma = 0.3 + 2.0j
    v = rng.standard_normal(ms1_small.n)
    assert np.array_equal(shifted_solve(ms1_small, [0, 0], sigma, v), v / ms1_small.diag(sigma))


def test_scalar_smw():
    ms = to_modal(tiny_system())
    assert shifted_solve(ms, [1.0], 1.0, np.ones(1))[0] == pytest.approx(1 / 3, rel=1e-15)


@pytest.mark.parametrize('seed', range(5))
def test_smw_vs_dense(seed):
    rng = np.random.default_rng(seed)
    s = random_system(rng, 200, p=3)
    ms = to_modal(s)
    K = s.stiffness.toarray()
    for _ in range(4):
        sigma = rng.uniform(0.01, 5) + 1j * rng.uniform(-40, 40)
        g = rng.uniform(0, 500, 3)
        P = sigma ** 2 * np.diag(s.mass) + sigma * damping_matrix(s, g) + K
        q = la.solve(P, s.input_map)
        x = shifted_solve(ms, g, sigma, ms.E_m)
        err = np.linalg.norm(ms.phi @ x - q, axis=0) / np.linalg.norm(q, axis=0)
        assert err.max() <= 1e-10


def test_transfer_pole_collision():
    ms = to_modal(tiny_system())
    with pytest.raises(PoleCollisionError):
        transfer_eval(ms, [0.0], 1j)


def test_transfer_scalar():
    # internal damping is 2*alpha_c*omega, so the denominator is 1 + 0.4 + 1
    ms = to_modal(tiny_system(alpha_c=0.2, e=(3.0,), h=(5.0,)))
    assert transfer_eval(ms, [0.0], 1.0)[0, 0] == pytest.approx(15 / 2.4, rel=1e-15)


def test_transfer_vs_first_order(ex1_300, ms1_300, rng):
    s = ex1_300
    g = np.array([700.0, 1300.0])
    fo = linearize(s.mass, damping_matrix(s, g), s.stiffness.toarray(), s.input_map,
                   s.output_map)
    for _ in range(5):
        sigma = rng.uniform(0.1, 2) + 1j * rng.uniform(0, 30)
        F = transfer_eval(ms1_300, g, sigma)
        Fd = fo.transfer(sigma)
        assert np.linalg.norm(F - Fd) <= 1e-10 * np.linalg.norm(Fd)


def test_conjugate_symmetry(ms1_small):
    g = [100.0, 40.0]
    s = 0.7 + 3.1j
    assert np.allclose(transfer_eval(ms1_small, g, s.conjugate()),
                       transfer_eval(ms1_small, g, s).conj(), rtol=1e-13, atol=0)


def test_derivative_finite_difference(ms1_small):
    g = [300.0, 50.0]
    s, h = 0.5 + 2.0j, 1e-6
    fd = (transfer_eval(ms1_small, g, s + h) - transfer_eval(ms1_small, g, s - h)) / (2 * h)
    dF = transfer_derivative(ms1_small, g, s)
    assert np.linalg.norm(dF - fd) <= 1e-6 * np.linalg.norm(dF)
