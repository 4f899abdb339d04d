"""Cell-centered grids on boxes with homogeneous-Neumann (zero-flux) operators.

Boundary handling uses mirror ghost cells: the ghost value equals the adjacent
interior value, so the flux through every boundary face is exactly zero. The
resulting Laplacian is symmetric negative semidefinite with the constants as
its kernel, and summation by parts holds exactly on the grid.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .krylov import pcg


@dataclass(frozen=True)
class Grid:
    extents: tuple
    cells: tuple

    def __post_init__(self):
        ext = tuple(float(e) for e in np.atleast_1d(self.extents))
        n = tuple(int(c) for c in np.atleast_1d(self.cells))
        if len(ext) != len(n) or len(n) not in (1, 2):
            raise ValueError("grid must be 1D or 2D with one extent per axis")
        if any(e <= 0 for e in ext):
            raise ValueError("extents must be positive")
        if any(c < 2 for c in n):
            raise ValueError("need at least 2 cells per axis")
        object.__setattr__(self, "extents", ext)
        object.__setattr__(self, "cells", n)

    @classmethod
    def uniform(cls, n, extent=1.0, dim=1):
        return cls((extent,) * dim, (n,) * dim)

    @property
    def dim(self):
        return len(self.cells)

    @property
    def shape(self):
        return self.cells

    @property
    def size(self):
        return int(np.prod(self.cells))

    @property
    def h(self):
        return tuple(e / n for e, n in zip(self.extents, self.cells))

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    @property
    def measure(self):
        return float(np.prod(self.extents))

    def axes(self):
        """Cell-center coordinates per axis, ``(i + 1/2) h``."""
        return tuple((np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.h))

    def centers(self):
        """Cell-center coordinate arrays shaped like the grid (``ij`` indexing)."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def field(self, values):
        return Field(self, values)

    def constant(self, c):
        return Field(self, np.full(self.shape, float(c)))

    def zeros(self):
        return self.constant(0.0)

    def coarsened(self):
        return Grid(self.extents, tuple(n // 2 for n in self.cells))


class Field:
    """Grid function holding one real value per cell."""

    __slots__ = ("grid", "values")

    def __init__(self, grid, values):
        values = np.asarray(values, dtype=float)
        if values.size != grid.size:
            raise ValueError(f"expected {grid.size} values, got {values.size}")
        self.grid = grid
        self.values = values.reshape(grid.shape)

    def _other(self, other):
        if isinstance(other, Field):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return Field(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return Field(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return Field(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return Field(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Field(self.grid, self.values / self._other(other))

    def __neg__(self):
        return Field(self.grid, -self.values)

    def copy(self):
        return Field(self.grid, self.values.copy())

    def min(self):
        return float(self.values.min())

    def max(self):
        return float(self.values.max())

    def __repr__(self):
        return f"Field(cells={self.grid.cells}, min={self.min():.4g}, max={self.max():.4g})"


def _values(f):
    return f.values if isinstance(f, Field) else np.asarray(f, dtype=float)


@lru_cache(maxsize=32)
def laplacian_matrix(grid):
    """Sparse (CSR) matrix of the mirror-ghost Neumann Laplacian, row-major order."""
    ops = []
    for n, h in zip(grid.cells, grid.h):
        main = np.full(n, -2.0)
        main[0] = main[-1] = -1.0
        off = np.ones(n - 1)
        ops.append(sp.diags([off, main, off], [-1, 0, 1], format="csr") / h**2)
    if grid.dim == 1:
        return ops[0].tocsr()
    nx, ny = grid.cells
    return (sp.kron(ops[0], sp.identity(ny)) + sp.kron(sp.identity(nx), ops[1])).tocsr()


def _face_differences(values, axis):
    return np.diff(values, axis=axis)


def laplacian_neumann(f):
    """Apply the 3-point (1D) / 5-point (2D) Neumann Laplacian."""
    grid = f.grid
    out = np.zeros(grid.shape)
    for axis, h in enumerate(grid.h):
        d = _face_differences(f.values, axis)
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        flux = np.pad(d, pad)  # zero flux on the boundary faces
        out += np.diff(flux, axis=axis) / h**2
    return Field(grid, out)


def integrate(f):
    return float(f.grid.cell_volume * np.sum(f.values))


def lp_norm(f, p=2):
    if p < 1:
        raise ValueError("p must be >= 1")
    if np.isinf(p):
        return linf(f)
    return float((f.grid.cell_volume * np.sum(np.abs(f.values) ** p)) ** (1.0 / p))


def l1_norm(f):
    return lp_norm(f, 1)


def l2_norm(f):
    return lp_norm(f, 2)


def linf(f):
    return float(np.max(np.abs(f.values)))


def mean(f):
    return integrate(f) / f.grid.measure


def inner(f, g):
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


def grad_l2_squared(f):
    """Squared discrete Dirichlet energy: sum over interior faces of h^dim (jump/h)^2."""
    grid = f.grid
    total = 0.0
    for axis, h in enumerate(grid.h):
        d = _face_differences(f.values, axis) / h
        total += grid.cell_volume * float(np.sum(d * d))
    return total


def grad_l2(f):
    return float(np.sqrt(grad_l2_squared(f)))


def grad_l4(f):
    """L4 norm of the face gradient magnitude (faces per axis summed in the 4th power)."""
    grid = f.grid
    total = 0.0
    for axis, h in enumerate(grid.h):
        d = _face_differences(f.values, axis) / h
        total += grid.cell_volume * float(np.sum(d**4))
    return float(total**0.25)


def neumann_poisson(w, tol=1e-10, maxiter=None):
    """Mean-zero solution of ``-Lap phi = w - mean(w)`` with zero-flux boundary.

    Conjugate gradients on ``-Lap`` restricted to mean-zero grid functions;
    raises :class:`NonConvergence` if the residual target is not met.
    """
    grid = w.grid
    rhs = (w.values - w.values.mean()).ravel()
    if not np.any(rhs):
        return grid.zeros()
    L = laplacian_matrix(grid)

    def project(x):
        return x - x.mean()

    phi = pcg(lambda x: -(L @ x), rhs, tol=tol, maxiter=maxiter, project=project)
    return Field(grid, phi)


def h1_dual_norm(w, tol=1e-10):
    """Discrete (H^1)' norm: sqrt(mean(w)^2 + ||grad phi||^2) with phi the Neumann potential."""
    phi = neumann_poisson(w, tol=tol)
    return float(np.sqrt(mean(w) ** 2 + grad_l2_squared(phi)))


def restrict(f, target):
    """Average a field onto a grid coarser by an integer factor per axis."""
    src = f.grid
    factors = []
    for nf, nc in zip(src.cells, target.cells):
        if nf % nc:
            raise ValueError("target grid must divide the source grid")
        factors.append(nf // nc)
    vals = f.values
    if src.dim == 1:
        vals = vals.reshape(target.cells[0], factors[0]).mean(axis=1)
    else:
        vals = vals.reshape(target.cells[0], factors[0], target.cells[1], factors[1]).mean(axis=(1, 3))
    return Field(target, vals)


def write_snapshot(path, f, t=None):
    """Plain-text snapshot: header lines then one value per line, row-major, 17 digits."""
    grid = f.grid
    lines = [
        f"dim {grid.dim}",
        "cells " + " ".join(str(n) for n in grid.cells),
        "extents " + " ".join(repr(e) for e in grid.extents),
    ]
    if t is not None:
        lines.append(f"time {t!r}")
    lines.append("values")
    lines.extend(f"{x:.17g}" for x in f.values.ravel())
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_snapshot(path):
    """Inverse of :func:`write_snapshot`; returns ``(field, time or None)``."""
    header = {}
    with open(path) as fh:
        lines = fh.read().split("\n")
    i = 0
    while lines[i].strip() != "values":
        key, _, rest = lines[i].strip().partition(" ")
        header[key] = rest.split()
        i += 1
    dim = int(header["dim"][0])
    cells = tuple(int(x) for x in header["cells"])
    extents = tuple(float(x) for x in header["extents"])
    if len(cells) != dim:
        raise ValueError("snapshot header is inconsistent")
    values = np.array([float(x) for x in lines[i + 1:] if x.strip()])
    t = float(header["time"][0]) if "time" in header else None
    return Field(Grid(extents, cells), values), t
