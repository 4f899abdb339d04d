import numpy as np
import pytest

from crossdiff.errors import NonConvergence
from crossdiff.krylov import pcg


def spd(n, seed):
    rng = np.random.default_rng(seed)
    Q = rng.normal(size=(n, n))
    return Q @ Q.T + n * np.eye(n)


def test_pcg_solves_spd_system():
    A = spd(20, 0)
    b = np.arange(20.0)
    x = pcg(lambda y: A @ y, b, tol=1e-13)
    assert np.allclose(A @ x, b, rtol=0, atol=1e-10 * np.linalg.norm(b))


def test_pcg_with_jacobi_preconditioner_matches_solution():
    A = spd(15, 1) + np.diag(np.linspace(1, 100, 15))
    b = np.ones(15)
    x = pcg(lambda y: A @ y, b, tol=1e-13, precond=1.0 / np.diag(A))
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-10)


def test_pcg_zero_rhs_returns_zero():
    assert np.all(pcg(lambda y: 2 * y, np.zeros(5)) == 0)


def test_pcg_projection_on_singular_operator():
    n = 10
    L = np.diag(-2.0 * np.ones(n)) + np.diag(np.ones(n - 1), 1) + np.diag(np.ones(n - 1), -1)
    L[0, 0] = L[-1, -1] = -1.0
    b = np.sin(np.arange(n))
    b -= b.mean()
    x = pcg(lambda y: -(L @ y), b, tol=1e-13, project=lambda y: y - y.mean())
    assert abs(x.mean()) < 1e-14
    assert np.allclose(-(L @ x), b, atol=1e-11)


def test_pcg_raises_when_out_of_iterations():
    with pytest.raises(NonConvergence):
        pcg(lambda y: spd(30, 2) @ y, np.ones(30), tol=1e-15, maxiter=2)
