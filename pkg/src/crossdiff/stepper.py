"""Time integration of the cross-diffusion system and of scalar linear parabolic problems.

Three schemes share the same v-update (implicit diffusion, explicit reaction):

* ``nondiv``: advances ``a = A(u, v)`` with the frozen-coefficient step
  ``(I - dt mu Lap) a' = a + dt a s`` and recovers ``u = U(a', v')``;
* ``div-explicit``: forward Euler on ``du/dt = Lap A(u, v) + u f``;
* ``div-implicit``: backward Euler on the diffusion, solved by damped Newton.

Each step is first order in time. Every variable-coefficient solve is put in
the symmetric form ``(diag(w) - c Lap) x = y`` and handed to CG.
"""

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from . import grid as gf
from .diagnostics import DiagnosticSeries
from .errors import CflViolation, NonConvergence, StepTooLarge
from .krylov import pcg
from .model import invert_A, ratio_U_over_a
from .regularize import Mollifier, mollify_space


class Scheme(str, Enum):
    NONDIV = "nondiv"
    DIV_EXPLICIT = "div-explicit"
    DIV_IMPLICIT = "div-implicit"


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    scheme: Scheme = Scheme.NONDIV
    linear_tol: float = 1e-10
    nonlinear_tol: float = 1e-10
    invert_tol: float = 1e-12
    truncation: float = np.inf
    eps: float = 0.0
    cfl_safety: float = 0.9
    max_halvings: int = 20

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if not (self.dt > 0 and self.t_end > 0):
            raise ValueError("dt and t_end must be positive")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")
        if not self.truncation > 0:
            raise ValueError("truncation level must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")

    @property
    def mollifier(self):
        return Mollifier(self.eps) if self.eps > 0 else None

    def cfl_limit(self, grid, a1):
        return self.cfl_safety * min(grid.h) ** 2 / (2 * grid.dim * a1)


@dataclass
class State:
    t: float
    u: gf.Field
    v: gf.Field
    a: gf.Field = None


# ---------------------------------------------------------------------------
# building blocks


def _spd_solve(grid, weight, coef, rhs, x0, tol):
    """Solve ``(diag(weight) - coef * Lap) x = rhs`` by Jacobi-preconditioned CG."""
    L = gf.laplacian_matrix(grid)
    w = np.broadcast_to(np.asarray(weight, dtype=float), grid.shape).ravel()
    diag = w - coef * L.diagonal()
    x = pcg(lambda x: w * x - coef * (L @ x), rhs.ravel(), x0=None if x0 is None else x0.ravel(),
            tol=tol, precond=1.0 / diag, atol=1e-300)
    return x.reshape(grid.shape)


def _check_sign(values, scale, what):
    lo = float(values.min())
    if lo < -1e-10 * max(scale, 1e-300):
        raise StepTooLarge(f"{what} went negative ({lo:.3e}); reduce dt")
    return lo


def _g_values(model, u, v, config, grid):
    M = config.truncation
    g = model.reaction.g(np.minimum(u, M), np.minimum(v, M))
    g = np.broadcast_to(np.asarray(g, dtype=float), grid.shape)
    m = config.mollifier
    if m is not None:
        g = mollify_space(gf.Field(grid, g), m).values
    return g


def _f_values(model, u, v, config, grid):
    f = model.reaction.f(np.minimum(u, config.truncation), v)
    return np.broadcast_to(np.asarray(f, dtype=float), grid.shape)


def _step_v_raw(state, model, dt, config):
    grid = state.v.grid
    u, v = state.u.values, state.v.values
    if dt * model.reaction.C_g * (1.0 + np.abs(u).max() + np.abs(v).max()) >= 1.0:
        raise StepTooLarge("v-step positivity guard dt*C_g*(1+|u|+|v|) < 1 fails")
    rhs = v + dt * v * _g_values(model, u, v, config, grid)
    return _spd_solve(grid, 1.0, dt * model.d_v, rhs, v, config.linear_tol)


def step_v(state, model, dt, config=None):
    """``(I - dt d_v Lap) v' = v + dt v g(u, v)``; clipped to ``v' >= 0`` after the guard."""
    config = config or SolverConfig(dt=dt, t_end=dt)
    out = _step_v_raw(state, model, dt, config)
    _check_sign(out, np.abs(state.v.values).max(), "v")
    return gf.Field(state.v.grid, np.maximum(out, 0.0))


def _a_of(state, model):
    if state.a is not None:
        return state.a.values
    return np.asarray(model.diffusivity.A(state.u.values, state.v.values), dtype=float)


def _step_a_raw(state, model, dt, dtv, config):
    grid = state.u.grid
    dif, rea = model.diffusivity, model.reaction
    a = _a_of(state, model)
    v_next = np.maximum(state.v.values + dt * dtv, 0.0)
    U = invert_A(dif, a, v_next, config.invert_tol)
    mu_vals = dif.d1A(U, v_next)
    ratio = ratio_U_over_a(dif, a, v_next, U)
    s = ratio * (rea.f(np.minimum(U, config.truncation), v_next) * mu_vals
                 + dif.d2B(U, v_next) * dtv)
    rhs = (a + dt * a * s) / mu_vals
    return _spd_solve(grid, 1.0 / mu_vals, dt, rhs, a, config.linear_tol)


def step_a_nondiv(state, model, dt, dtv, config=None):
    """Frozen-coefficient step of ``da/dt = mu(a, v) Lap a + a s(a, v, dv/dt)``.

    ``dtv`` is the backward difference ``(v' - v)/dt`` of the v-step taken
    first; ``mu`` and ``s`` are evaluated at ``(a, v')``.
    """
    config = config or SolverConfig(dt=dt, t_end=dt)
    dtv = dtv.values if isinstance(dtv, gf.Field) else np.asarray(dtv, dtype=float)
    out = _step_a_raw(state, model, dt, dtv, config)
    _check_sign(out, np.abs(_a_of(state, model)).max(), "a")
    return gf.Field(state.u.grid, np.maximum(out, 0.0))


def _newton_div(model, u, v_next, rhs, dt, config, grid):
    dif = model.diffusivity
    L = gf.laplacian_matrix(grid)
    scale = max(1.0, np.abs(rhs).max())
    tol = config.nonlinear_tol * scale

    def residual(w):
        return w - dt * (L @ np.asarray(dif.A(w, v_next), dtype=float).ravel()).reshape(grid.shape) - rhs

    w = u.copy()
    R = residual(w)
    for _ in range(50):
        rn = np.abs(R).max()
        if rn <= tol:
            return w
        D = np.asarray(dif.d1A(w, v_next), dtype=float)
        z = _spd_solve(grid, 1.0 / D, dt, -R, None, config.linear_tol * 1e-2)
        delta = z / D
        lam = 1.0
        accepted = False
        while lam >= 1.0 / 64:
            trial = np.maximum(w + lam * delta, 0.0)
            Rt = residual(trial)
            if np.abs(Rt).max() < rn:
                w, R, accepted = trial, Rt, True
                break
            lam *= 0.5
        if not accepted:
            # Picard fallback: (I - dt Lap diag(B(w))) w' = rhs in symmetric form
            Bw = np.asarray(dif.B(w, v_next), dtype=float)
            z = _spd_solve(grid, 1.0 / Bw, dt, rhs, None, config.linear_tol)
            w = np.maximum(z / Bw, 0.0)
            R = residual(w)
    if np.abs(R).max() <= tol:
        return w
    raise NonConvergence(f"implicit divergence step: residual {np.abs(R).max():.3e} > {tol:.3e}")


def _step_u_div_raw(state, model, dt, config, implicit, v_next):
    grid = state.u.grid
    dif = model.diffusivity
    u, v = state.u.values, state.v.values
    if not implicit:
        limit = config.cfl_limit(grid, dif.a1)
        if dt > limit * (1 + 1e-12):
            raise CflViolation(f"dt={dt:.3e} exceeds explicit limit {limit:.3e}")
        lapA = gf.laplacian_neumann(gf.Field(grid, dif.A(u, v))).values
        return u + dt * (lapA + u * _f_values(model, u, v, config, grid))
    react = u * _f_values(model, u, v, config, grid)
    return _newton_div(model, u, v_next, u + dt * react, dt, config, grid)


def step_u_div(state, model, dt, config=None, implicit=False, v_next=None):
    """Divergence-form step of ``du/dt = Lap A(u, v) + u f(u, v)``.

    Explicit: forward Euler at the old state. Implicit: ``u' - dt Lap A(u', v')
    = u + dt u f(u, v)``, which needs ``v'`` (computed here if not given).
    """
    config = config or SolverConfig(dt=dt, t_end=dt)
    if implicit and v_next is None:
        v_next = step_v(state, model, dt, config)
    vn = v_next.values if isinstance(v_next, gf.Field) else v_next
    out = _step_u_div_raw(state, model, dt, config, implicit, vn)
    _check_sign(out, np.abs(state.u.values).max(), "u")
    return gf.Field(state.u.grid, np.maximum(out, 0.0))


def step_linear_parabolic(b, gamma, r, dt, tol=1e-10):
    """Implicit step of ``db/dt - gamma Lap b = r b`` with frozen ``gamma`` and explicit ``r b``."""
    grid = b.grid
    gam = gamma.values if isinstance(gamma, gf.Field) else np.broadcast_to(float(gamma), grid.shape)
    rv = r.values if isinstance(r, gf.Field) else np.broadcast_to(float(r), grid.shape)
    if np.any(gam <= 0):
        raise ValueError("gamma must be positive")
    rhs = (b.values + dt * rv * b.values) / gam
    return gf.Field(grid, _spd_solve(grid, 1.0 / gam, dt, rhs, b.values, tol))


# ---------------------------------------------------------------------------
# driver


def _advance_once(state, model, dt, config):
    """One step of the configured scheme; returns the new state and raw minima."""
    grid = state.u.grid
    scheme = config.scheme
    if scheme is Scheme.DIV_EXPLICIT:
        v_raw = _step_v_raw(state, model, dt, config)
        u_raw = _step_u_div_raw(state, model, dt, config, False, None)
        min_v = _check_sign(v_raw, np.abs(state.v.values).max(), "v")
        min_u = _check_sign(u_raw, np.abs(state.u.values).max(), "u")
        return State(state.t + dt, gf.Field(grid, np.maximum(u_raw, 0)),
                     gf.Field(grid, np.maximum(v_raw, 0))), min_u, min_v

    v_raw = _step_v_raw(state, model, dt, config)
    min_v = _check_sign(v_raw, np.abs(state.v.values).max(), "v")
    v_next = np.maximum(v_raw, 0.0)
    if scheme is Scheme.DIV_IMPLICIT:
        u_raw = _step_u_div_raw(state, model, dt, config, True, v_next)
        min_u = _check_sign(u_raw, np.abs(state.u.values).max(), "u")
        return State(state.t + dt, gf.Field(grid, np.maximum(u_raw, 0)),
                     gf.Field(grid, v_next)), min_u, min_v

    dtv = (v_next - state.v.values) / dt
    a_raw = _step_a_raw(state, model, dt, dtv, config)
    a_old = _a_of(state, model)
    min_a = _check_sign(a_raw, np.abs(a_old).max(), "a")
    a_next = np.maximum(a_raw, 0.0)
    u_next = invert_A(model.diffusivity, a_next, v_next, config.invert_tol)
    # u inherits the sign of a; report the pre-clip minimum through it
    min_u = min_a / model.diffusivity.a1 if min_a < 0 else float(np.min(u_next))
    return State(state.t + dt, gf.Field(grid, u_next), gf.Field(grid, v_next),
                 gf.Field(grid, a_next)), min_u, min_v


def _record(model, config, old, new, dt, min_u, min_v):
    dif, rea = model.diffusivity, model.reaction
    u, v = new.u, new.v
    rec = {
        "t": new.t,
        "mass_u": gf.integrate(u),
        "mass_v": gf.integrate(v),
        "l2_u": gf.l2_norm(u),
        "l2_v": gf.l2_norm(v),
        "l4_u": gf.lp_norm(u, 4),
        "linf_u": gf.linf(u),
        "linf_v": gf.linf(v),
        "l2_grad_u": gf.grad_l2(u),
        "l2_grad_v": gf.grad_l2(v),
        "mass_residual": 0.0,
        "energy_residual": 0.0,
        "min_u": min_u,
        "min_v": min_v,
        "dt": dt,
    }
    if old is not None:
        grid = u.grid
        f_old = _f_values(model, old.u.values, old.v.values, config, grid)
        rec["mass_residual"] = (gf.integrate(u) - gf.integrate(old.u)
                                - dt * gf.integrate(gf.Field(grid, old.u.values * f_old)))
        l2_old_sq = gf.l2_norm(old.u) ** 2
        rec["energy_residual"] = (0.5 * (rec["l2_u"] ** 2 - l2_old_sq) / dt
                                  - dif.a2**2 / (2 * dif.a0) * rec["l2_grad_v"] ** 2
                                  - rea.C_f * l2_old_sq)
    return rec


@dataclass
class RunResult:
    state: State
    series: DiagnosticSeries
    snapshots: list
    initial: State


def prepare_initial(model, config, u0, v0):
    """Apply the configured mollification to the initial data and build the state."""
    m = config.mollifier
    if m is not None:
        u0 = mollify_space(u0, m)
        v0 = mollify_space(v0, m)
    if u0.grid != v0.grid:
        raise ValueError("u0 and v0 must share a grid")
    if u0.min() < 0 or v0.min() < 0:
        raise ValueError("initial data must be nonnegative")
    a0 = None
    if config.scheme is Scheme.NONDIV:
        a0 = gf.Field(u0.grid, model.diffusivity.A(u0.values, v0.values))
    return State(0.0, u0.copy(), v0.copy(), a0)


def run(model, config, u0, v0, observers=(), snapshot_times=()):
    """Integrate from ``(u0, v0)`` to ``config.t_end``.

    Steps that trip a positivity guard or fail to converge are retried as two
    half steps, recursively, up to ``config.max_halvings`` levels. Observers
    are called with the initial state and after every (sub)step.
    """
    state = prepare_initial(model, config, u0, v0)
    grid = state.u.grid
    if config.scheme is Scheme.DIV_EXPLICIT:
        limit = config.cfl_limit(grid, model.diffusivity.a1)
        if config.dt > limit * (1 + 1e-12):
            raise CflViolation(f"dt={config.dt:.3e} exceeds explicit limit {limit:.3e}")

    series = DiagnosticSeries()
    series.append(_record(model, config, None, state, 0.0, state.u.min(), state.v.min()))
    pending = sorted(float(t) for t in snapshot_times)
    snapshots = []
    initial = state

    def emit(st):
        for obs in observers:
            obs(st)
        while pending and st.t >= pending[0] - 1e-12 * max(1.0, config.t_end):
            snapshots.append((st.t, st.u.copy(), st.v.copy()))
            pending.pop(0)

    emit(state)

    def advance(st, dt, depth):
        try:
            new, min_u, min_v = _advance_once(st, model, dt, config)
        except (StepTooLarge, NonConvergence):
            if depth >= config.max_halvings:
                raise
            mid = advance(st, 0.5 * dt, depth + 1)
            return advance(mid, 0.5 * dt, depth + 1)
        series.append(_record(model, config, st, new, dt, min_u, min_v))
        emit(new)
        return new

    n_steps = int(np.ceil(config.t_end / config.dt - 1e-9))
    for k in range(n_steps):
        t_target = min((k + 1) * config.dt, config.t_end)
        dt = t_target - state.t
        if dt <= 0:
            continue
        state = advance(state, dt, 0)
    return RunResult(state=state, series=series, snapshots=snapshots, initial=initial)


def with_scheme(config, scheme):
    return replace(config, scheme=Scheme(scheme))
