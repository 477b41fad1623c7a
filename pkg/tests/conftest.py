import numpy as np
import pytest
import scipy.sparse as sp

from h2damp.model import SecondOrderSystem, build_example1, build_example2
from h2damp.modalsolve import to_modal


def tiny_system(n=1, m=1.0, k=1.0, alpha_c=0.0, b=(1.0,), e=(1.0,), h=(1.0,), upper=np.inf):
    return SecondOrderSystem(
        mass=np.full(n, m), stiffness=sp.csr_matrix(np.atleast_2d(k)), alpha_c=alpha_c,
        damper_geometry=np.reshape(b, (n, -1)), gain_map=np.eye(np.size(b) // n),
        gain_bounds=[[0.0, upper]] * (np.size(b) // n), input_map=np.reshape(e, (n, -1)),
        output_map=np.reshape(h, (-1, n)))


def random_system(rng, n, p=2, m_in=2, m_out=3, alpha_c=0.01):
    """Spring chain with random masses, springs and damper locations."""
    springs = rng.uniform(100, 1000, n + 1)
    K = sp.diags([springs[:-1] + springs[1:], -springs[1:-1], -springs[1:-1]], [0, -1, 1])
    B = np.zeros((n, p))
    for i, idx in enumerate(rng.choice(n, p, replace=False)):
        B[idx, i] = 1.0
    return SecondOrderSystem(
        mass=rng.uniform(1, 10, n), stiffness=K.tocsr(), alpha_c=alpha_c, damper_geometry=B,
        gain_map=np.eye(p), gain_bounds=[[0.0, np.inf]] * p,
        input_map=rng.standard_normal((n, m_in)), output_map=rng.standard_normal((m_out, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope='session')
def ex1_300():
    return build_example1(300, 0.005, 8, 134)


@pytest.fixture(scope='session')
def ms1_300(ex1_300):
    return to_modal(ex1_300)


@pytest.fixture(scope='session')
def ex1_small():
    return build_example1(60, 0.005, 3, 30)


@pytest.fixture(scope='session')
def ms1_small(ex1_small):
    return to_modal(ex1_small)


@pytest.fixture(scope='session')
def ex2_small():
    return build_example2(40, 0.003, 10, 45)


ACCEPTANCE = {}


def record(criterion, ok, detail):
    """Store one pass/fail line; printed live and in the session summary."""
    line = f"{criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section('acceptance criteria')
        for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE[key])
