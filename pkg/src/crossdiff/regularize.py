"""Truncation and mollification on grids.

Functions are extended by zero outside the box before convolving, so mass
leaks out near the boundary. Time is extended by holding the first and last
snapshots constant.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage, signal

from .grid import Field

_DIRECT_LIMIT = 4096


@dataclass(frozen=True)
class Mollifier:
    """Bump ``(1 - (r/R)^2)^2`` on radius ``R = 3 eps``, normalized to unit discrete mass."""

    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("mollifier eps must be positive")

    @property
    def radius(self):
        return 3.0 * self.eps

    def kernel(self, spacings):
        """Normalized weights on the lattice with the given spacing per axis."""
        half = [int(np.floor(self.radius / h)) for h in spacings]
        offsets = np.meshgrid(*[np.arange(-k, k + 1) * h for k, h in zip(half, spacings)],
                              indexing="ij")
        r2 = sum(o**2 for o in offsets) / self.radius**2
        w = np.where(r2 < 1.0, (1.0 - r2) ** 2, 0.0)
        return w / w.sum()


def truncate(f, M):
    if not M > 0:
        raise ValueError("truncation level must be positive")
    return Field(f.grid, np.minimum(f.values, M))


def _correlate_zero(values, kernel):
    if kernel.size == 1:
        return values * kernel.flat[0]
    if kernel.size <= _DIRECT_LIMIT:
        return ndimage.correlate(values, kernel, mode="constant", cval=0.0)
    # kernel is symmetric, so convolution equals correlation
    return signal.fftconvolve(values, kernel, mode="same")


def mollify_space(f, m):
    """Convolve ``f`` (zero outside the box) with the mollifier kernel."""
    k = m.kernel(f.grid.h)
    return Field(f.grid, _correlate_zero(f.values, k))


def mollify_reaction(snapshots, m, dt):
    """Space-time mollification of a uniformly spaced sequence of fields.

    The kernel lives on the ``(t, x)`` lattice with spacing ``(dt, h...)``.
    Outside the recorded window the sequence is continued by its first/last
    snapshot; outside the box it is zero.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    snapshots = list(snapshots)
    grid = snapshots[0].grid
    stack = np.stack([s.values for s in snapshots])
    k = m.kernel((dt,) + grid.h)
    half = [(n - 1) // 2 for n in k.shape]
    padded = np.pad(stack, [(half[0], half[0])] + [(0, 0)] * grid.dim, mode="edge")
    padded = np.pad(padded, [(0, 0)] + [(hk, hk) for hk in half[1:]])
    out = signal.correlate(padded, k, mode="valid", method="direct" if k.size <= _DIRECT_LIMIT else "fft")
    return [Field(grid, out[i]) for i in range(len(snapshots))]
