"""Coefficient functions, structural audits and the change of variables a = A(u, v).

All coefficient callables take numpy arrays (or scalars) ``u, v`` and must
broadcast. Partial derivatives that are not supplied in closed form are
approximated by centered differences with step ``1e-6 * max(1, |arg|)``,
switching to a one-sided stencil where the centered one would leave the
nonnegative quadrant.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import NoSignChange, NonConvergence

FD_REL_STEP = 1e-6
RATIO_SWITCH = 1e-12


def _fd_partial(fun, u, v, axis):
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    x = u if axis == 0 else v
    h = FD_REL_STEP * np.maximum(1.0, np.abs(x))
    lo = np.where(x - h >= 0.0, x - h, x)
    hi = x + h
    if axis == 0:
        return (fun(hi, v) - fun(lo, v)) / (hi - lo)
    return (fun(u, hi) - fun(u, lo)) / (hi - lo)


def _fd_scalar(fun, x):
    x = np.asarray(x, dtype=float)
    h = FD_REL_STEP * np.maximum(1.0, np.abs(x))
    lo = np.where(x - h >= 0.0, x - h, x)
    return (fun(x + h) - fun(lo)) / (x + h - lo)


@dataclass(frozen=True)
class DiffusivitySpec:
    """Diffusion rate ``B`` of the first species, with ``A(u, v) = u B(u, v)``.

    ``a0 <= B, d1A <= a1``, ``|d2A| <= a2`` and ``|d2B| <= a3`` are the
    structural bounds; ``A`` may be supplied directly when ``u B`` is only
    known through another construction (starvation-driven models).
    """

    B: Callable
    a0: float
    a1: float
    a2: float
    a3: float
    A_fn: Optional[Callable] = None
    d1A_fn: Optional[Callable] = None
    d2A_fn: Optional[Callable] = None
    d2B_fn: Optional[Callable] = None

    def A(self, u, v):
        if self.A_fn is not None:
            return self.A_fn(u, v)
        return np.asarray(u, dtype=float) * self.B(u, v)

    def d1A(self, u, v):
        if self.d1A_fn is not None:
            return self.d1A_fn(u, v)
        return _fd_partial(self.A, u, v, 0)

    def d2A(self, u, v):
        if self.d2A_fn is not None:
            return self.d2A_fn(u, v)
        return _fd_partial(self.A, u, v, 1)

    def d2B(self, u, v):
        if self.d2B_fn is not None:
            return self.d2B_fn(u, v)
        return _fd_partial(self.B, u, v, 1)


@dataclass(frozen=True)
class ReactionSpec:
    f: Callable
    g: Callable
    C_f: float
    C_f_prime: float
    C_g: float
    C_g_prime: float


@dataclass(frozen=True)
class StarvationSpec:
    """Microscopic split of ``u`` into an active part ``u_a`` and a starving part ``u_b``.

    The split solves ``phi(b u_b + d v) u_b = psi(a u_a + c v) u_a`` with
    ``u_a + u_b = u``; ``phi`` and ``psi`` are nonnegative nondecreasing
    conversion rates of one variable.
    """

    phi: Callable
    psi: Callable
    a: float
    b: float
    c: float
    d: float
    d_a: float
    d_b: float
    phi_prime: Optional[Callable] = None
    psi_prime: Optional[Callable] = None

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d, self.d_a, self.d_b) <= 0:
            raise ValueError("starvation parameters must be positive")
        if self.d_a == self.d_b:
            raise ValueError("d_a and d_b must differ")


@dataclass(frozen=True)
class ModelSpec:
    diffusivity: DiffusivitySpec
    reaction: ReactionSpec
    d_v: float
    starvation: Optional[StarvationSpec] = None
    name: str = "custom"

    def __post_init__(self):
        if not self.d_v > 0:
            raise ValueError("d_v must be positive")

    @property
    def origin(self):
        return "StarvationDriven" if self.starvation is not None else "Direct"


# ---------------------------------------------------------------------------
# structural audit


@dataclass
class CheckResult:
    name: str
    slack: float
    where: tuple
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        u, v = self.where
        return f"{status} {self.name}: worst slack {self.slack:.6g} at (u={u:.6g}, v={v:.6g})"


@dataclass
class AssumptionReport:
    box: tuple
    samples: int
    checks: list = field(default_factory=list)

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    @property
    def violations(self):
        return [c for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def summary(self):
        return "\n".join(c.line() for c in self.checks)


def check_assumptions(model, box, samples=41, rtol=1e-8):
    """Sample every structural inequality on ``box = ((u_lo, u_hi), (v_lo, v_hi))``.

    Slack is ``bound - value`` minimized over the lattice; a check fails when
    the slack drops below ``-rtol * max(1, |bound|)``. Violations are reported,
    never raised.
    """
    if samples < 2:
        raise ValueError("need at least 2 samples per axis")
    (u_lo, u_hi), (v_lo, v_hi) = box
    if u_hi < u_lo or v_hi < v_lo or min(u_lo, v_lo) < 0:
        raise ValueError("box must be a nonempty subset of the nonnegative quadrant")
    U, V = np.meshgrid(np.linspace(u_lo, u_hi, samples), np.linspace(v_lo, v_hi, samples),
                       indexing="ij")
    dif, rea = model.diffusivity, model.reaction
    report = AssumptionReport(box=box, samples=samples)

    def add(name, slack_arr, scale):
        slack_arr = np.broadcast_to(np.asarray(slack_arr, dtype=float), U.shape)
        k = np.unravel_index(np.argmin(slack_arr), U.shape)
        worst = float(slack_arr[k])
        report.checks.append(CheckResult(name, worst, (float(U[k]), float(V[k])),
                                         worst >= -rtol * max(1.0, scale)))

    report.checks.append(CheckResult("d_v > 0", float(model.d_v), (0.0, 0.0), model.d_v > 0))
    B = dif.B(U, V)
    add("B >= a0", B - dif.a0, dif.a0)
    add("B <= a1", dif.a1 - B, dif.a1)
    d1A = dif.d1A(U, V)
    add("d1A >= a0", d1A - dif.a0, dif.a0)
    add("d1A <= a1", dif.a1 - d1A, dif.a1)
    add("|d2A| <= a2", dif.a2 - np.abs(dif.d2A(U, V)), dif.a2)
    add("|d2B| <= a3", dif.a3 - np.abs(dif.d2B(U, V)), dif.a3)

    for name, fun, C, Cp in (("f", rea.f, rea.C_f, rea.C_f_prime),
                             ("g", rea.g, rea.C_g, rea.C_g_prime)):
        vals = fun(U, V)
        add(f"{name} <= C_{name}", C - vals, C)
        add(f"{name} >= -C_{name}(1+u+v)", vals + C * (1.0 + U + V), C)
        add(f"|d1{name}| <= C_{name}'", Cp - np.abs(_fd_partial(fun, U, V, 0)), Cp)
        add(f"|d2{name}| <= C_{name}'", Cp - np.abs(_fd_partial(fun, U, V, 1)), Cp)
    return report


# ---------------------------------------------------------------------------
# change of variables


def invert_A(diff, a, v, tol=1e-12, maxiter=200):
    """Return ``u >= 0`` with ``A(u, v) = a`` (elementwise, vectorized).

    Newton's method on ``A(., v) - a`` safeguarded by bisection on the bracket
    ``[a/a1, a/a0]``, which contains the root because ``a0 <= B <= a1``.
    """
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    a, v = np.broadcast_arrays(a, v)
    scalar = a.ndim == 0
    a = np.atleast_1d(a).astype(float)
    v = np.atleast_1d(v).astype(float)
    if np.any(a < 0) or np.any(v < 0):
        raise ValueError("invert_A needs a >= 0 and v >= 0")

    lo = a / diff.a1
    hi = a / diff.a0
    u = 2.0 * a / (diff.a0 + diff.a1)
    res = diff.A(u, v) - a
    active = np.abs(res) > tol
    for _ in range(maxiter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        ui, vi, ri = u[idx], v[idx], res[idx]
        lo_i, hi_i = lo[idx], hi[idx]
        lo_i = np.where(ri < 0, ui, lo_i)
        hi_i = np.where(ri > 0, ui, hi_i)
        slope = diff.d1A(ui, vi)
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = ui - ri / slope
        bad = ~np.isfinite(trial) | (trial <= lo_i) | (trial >= hi_i)
        trial = np.where(bad, 0.5 * (lo_i + hi_i), trial)
        lo[idx], hi[idx], u[idx] = lo_i, hi_i, trial
        res[idx] = diff.A(trial, vi) - a[idx]
        stalled = (hi[idx] - lo[idx]) <= 4 * np.finfo(float).eps * np.maximum(hi[idx], 1e-300)
        active[idx] = (np.abs(res[idx]) > tol) & ~stalled
    if np.any(np.abs(res) > tol):
        k = int(np.argmax(np.abs(res)))
        raise NonConvergence(
            f"invert_A: residual {abs(res[k]):.3e} > tol {tol:.1e} at a={a[k]:.6g}, v={v[k]:.6g}"
        )
    return float(u[0]) if scalar else u.reshape(np.shape(a))


def mu(diff, a, v, tol=1e-12):
    """Diffusion rate of the nondivergence form, ``d1A(U(a, v), v)``."""
    return diff.d1A(invert_A(diff, a, v, tol), v)


def ratio_U_over_a(diff, a, v, U=None, tol=1e-12):
    """``U(a, v)/a`` with its continuity limit ``1/d1A(0, v)`` for ``a <= 1e-12``."""
    a = np.asarray(a, dtype=float)
    v = np.asarray(v, dtype=float)
    if U is None:
        U = invert_A(diff, a, v, tol)
    small = a <= RATIO_SWITCH
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(small, 1.0 / diff.d1A(np.zeros_like(a), v), U / np.where(small, 1.0, a))
    return r if r.ndim else float(r)


def source_s(diff, reac, a, v, dtv, M=np.inf, tol=1e-12):
    """Source rate ``s_M`` of the nondivergence equation ``da/dt = mu Lap a + a s``."""
    U = invert_A(diff, a, v, tol)
    ratio = ratio_U_over_a(diff, a, v, U)
    out = ratio * (reac.f(np.minimum(U, M), v) * diff.d1A(U, v) + diff.d2B(U, v) * dtv)
    return out if np.ndim(out) else float(out)


# ---------------------------------------------------------------------------
# starvation-driven diffusivity


def _split_residual(sp, s, u, v):
    return sp.phi(sp.b * (u - s) + sp.d * v) * (u - s) - sp.psi(sp.a * s + sp.c * v) * s


def _split_slope(sp, s, u, v):
    xb = sp.b * (u - s) + sp.d * v
    xa = sp.a * s + sp.c * v
    dphi = sp.phi_prime(xb) if sp.phi_prime else _fd_scalar(sp.phi, xb)
    dpsi = sp.psi_prime(xa) if sp.psi_prime else _fd_scalar(sp.psi, xa)
    return -sp.b * dphi * (u - s) - sp.phi(xb) - sp.a * dpsi * s - sp.psi(xa)


def starvation_split(sp, u, v, tol=1e-14, maxiter=200):
    """Return ``(u_a, u_b)`` solving the starvation split, vectorized.

    Newton on ``s = u_a`` safeguarded by bisection on ``[0, u]``; the residual
    ``F(s)`` decreases from ``F(0) >= 0`` to ``F(u) <= 0``. Iterates until the
    bracket collapses to rounding so that ``A`` built from the split is a
    deterministic, monotone function to machine precision.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    u, v = np.broadcast_arrays(u, v)
    scalar = u.ndim == 0
    u = np.atleast_1d(u).astype(float)
    v = np.atleast_1d(v).astype(float)
    if np.any(u < 0) or np.any(v < 0):
        raise ValueError("starvation_split needs u >= 0 and v >= 0")

    F0 = _split_residual(sp, np.zeros_like(u), u, v)
    Fu = _split_residual(sp, u, u, v)
    if np.any(F0 * Fu > 0):
        k = int(np.argmax(F0 * Fu))
        raise NoSignChange(f"split residual has no sign change on [0, {u[k]:.6g}] at v={v[k]:.6g}")

    lo = np.zeros_like(u)
    hi = u.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(F0 - Fu > 0, u * F0 / (F0 - Fu), 0.5 * u)
    s = np.clip(s, lo, hi)
    active = u > 0
    for _ in range(maxiter):
        if not active.any():
            break
        idx = np.nonzero(active)[0]
        si, ui, vi = s[idx], u[idx], v[idx]
        Fi = _split_residual(sp, si, ui, vi)
        lo_i = np.where(Fi > 0, si, lo[idx])
        hi_i = np.where(Fi < 0, si, hi[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            trial = si - Fi / _split_slope(sp, si, ui, vi)
        done = (Fi == 0) | (np.abs(trial - si) <= 4 * np.finfo(float).eps * ui) \
            | (hi_i - lo_i <= 4 * np.finfo(float).eps * ui)
        bad = ~np.isfinite(trial) | (trial <= lo_i) | (trial >= hi_i)
        trial = np.where(bad, 0.5 * (lo_i + hi_i), trial)
        s[idx] = np.where(done, si, trial)
        lo[idx], hi[idx] = lo_i, hi_i
        active[idx] = ~done
    resid = np.abs(_split_residual(sp, s, u, v))
    if np.any(resid > tol * (1.0 + u)) and np.any(active):
        raise NonConvergence("starvation_split did not converge")
    s = np.clip(s, 0.0, u)
    ua, ub = s, u - s
    if scalar:
        return float(ua[0]), float(ub[0])
    return ua.reshape(np.shape(u)), ub.reshape(np.shape(u))


def starvation_A(sp, u, v):
    ua, ub = starvation_split(sp, u, v)
    return sp.d_a * ua + sp.d_b * ub


def _starvation_zero_fraction(sp, v):
    """Limit of ``u_a/u`` as ``u -> 0`` (only valid where phi(d v), psi(c v) > 0)."""
    p = sp.phi(sp.d * v)
    q = sp.psi(sp.c * v)
    return p / (p + q)


def starvation_diffusivity(sp, box=((0.0, 10.0), (0.0, 10.0)), samples=61, margin=1.05):
    """Wrap a starvation split into a :class:`DiffusivitySpec`.

    ``a0, a1`` are ``min/max(d_a, d_b)``; ``a2, a3`` are sampled suprema on
    ``box`` inflated by ``margin``. ``phi`` and ``psi`` must be positive at 0
    for ``B`` to extend continuously to ``u = 0``.
    """

    def A(u, v):
        return starvation_A(sp, u, v)

    def B(u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        u, v = np.broadcast_arrays(u, v)
        small = u <= RATIO_SWITCH
        safe_u = np.where(small, 1.0, u)
        r0 = _starvation_zero_fraction(sp, v)
        out = np.where(small, sp.d_a * r0 + sp.d_b * (1.0 - r0), A(safe_u, v) / safe_u)
        return out if out.ndim else float(out)

    base = DiffusivitySpec(B=B, a0=min(sp.d_a, sp.d_b), a1=max(sp.d_a, sp.d_b),
                           a2=np.inf, a3=np.inf, A_fn=A)
    (u_lo, u_hi), (v_lo, v_hi) = box
    U, V = np.meshgrid(np.linspace(u_lo, u_hi, samples), np.linspace(v_lo, v_hi, samples),
                       indexing="ij")
    a2 = margin * float(np.max(np.abs(base.d2A(U, V))))
    a3 = margin * float(np.max(np.abs(base.d2B(U, V))))
    return DiffusivitySpec(B=B, a0=base.a0, a1=base.a1, a2=max(a2, 1e-12), a3=max(a3, 1e-12),
                           A_fn=A)
