"""Preconditioned conjugate gradients for the SPD systems met by the stepper.

Kept in-house (rather than ``scipy.sparse.linalg.cg``) because the Neumann
Poisson solve needs the iterate re-projected onto the mean-zero subspace at
every iteration, and because a fixed operation order keeps runs bit-identical.
"""

import numpy as np

from .errors import NonConvergence


def pcg(matvec, b, x0=None, tol=1e-10, maxiter=None, precond=None, project=None,
        atol=0.0):
    """Solve ``matvec(x) = b`` for a symmetric positive (semi)definite operator.

    Stops when ``||r||_2 <= max(tol * ||b||_2, atol)``. ``precond`` is applied
    as ``z = precond * r`` (an array of diagonal inverse weights) when given.
    ``project`` is called on the iterate and the search directions to remove
    an operator kernel, e.g. the constants for a pure Neumann Laplacian.
    """
    b = np.asarray(b, dtype=float)
    shape = b.shape
    b = b.ravel()
    n = b.size
    if maxiter is None:
        maxiter = 10 * n + 50
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float).ravel()
    if project is not None:
        x = project(x)

    bnorm = np.sqrt(b @ b)
    target = max(tol * bnorm, atol)
    r = b - matvec(x)
    if project is not None:
        r = project(r)
    rnorm = np.sqrt(r @ r)
    if rnorm <= target:
        return x.reshape(shape)

    z = r * precond if precond is not None else r
    p = z.copy()
    rz = r @ z
    for _ in range(maxiter):
        Ap = matvec(p)
        pAp = p @ Ap
        if pAp <= 0.0:
            raise NonConvergence("CG breakdown: operator not positive definite on the search space")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if project is not None:
            x = project(x)
            r = project(r)
        rnorm = np.sqrt(r @ r)
        if rnorm <= target:
            return x.reshape(shape)
        z = r * precond if precond is not None else r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise NonConvergence(
        f"CG did not converge in {maxiter} iterations (residual {rnorm:.3e}, target {target:.3e})"
    )
