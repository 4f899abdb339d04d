"""Executable checks of the a-priori estimates and stability statements.

Every check is a pure function of recorded data (or of runs it performs
itself); none of the analytic constants C(T) are reconstructed. Stability
reports fit a Gronwall rate to the distance between two runs and record the
norms of the reference solution that the analytic constant depends on.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import grid as gf
from .diagnostics import DiagnosticSeries
from .stepper import run, step_linear_parabolic

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

__all__ = [
    "DiagnosticSeries", "MaxPrincipleResult", "EnergyResult", "StabilityReport",
    "AppendixReport", "ConvergenceReport", "check_max_principle", "check_energy_estimate",
    "check_nonnegativity", "check_mass_identity", "default_lambda", "default_dual_weight",
    "fit_gronwall", "stability_experiment", "dual_stability_experiment",
    "appendix_bound_check", "richardson", "fit_order", "grid_convergence", "dt_convergence",
    "regularization_convergence", "combined_l2",
]


@dataclass
class MaxPrincipleResult:
    passed: bool
    worst_ratio: float
    ratios: np.ndarray


def check_max_principle(series, C_g, v0_linf, rtol=1e-8):
    """``linf v(t) <= exp(C_g t) linf v(0)``, up to a factor ``1 + rtol``."""
    t = series["t"]
    ratios = series["linf_v"] / (np.exp(C_g * t) * v0_linf)
    worst = float(np.max(ratios))
    return MaxPrincipleResult(worst <= 1.0 + rtol, worst, ratios)


def energy_residuals(series, model):
    """Per-step residual of ``d/dt ||u||^2/2 <= a2^2/(2 a0) ||grad v||^2 + C_f ||u||^2``."""
    dif = model.diffusivity
    l2 = series["l2_u"]
    dt = series["dt"][1:]
    return (0.5 * (l2[1:] ** 2 - l2[:-1] ** 2) / dt
            - dif.a2**2 / (2 * dif.a0) * series["l2_grad_v"][1:] ** 2
            - model.reaction.C_f * l2[:-1] ** 2)


@dataclass
class EnergyResult:
    passed: bool
    max_violation: float
    max_violation_half: float = None
    ratio: float = None


def check_energy_estimate(series, model, series_half=None, halving_factor=0.6, atol=1e-12):
    """Largest positive residual of the discrete energy inequality.

    Without ``series_half`` the check passes only if there is no violation
    beyond ``atol``. With a companion run at ``dt/2`` it passes when the
    violation there is at most ``halving_factor`` times the one at ``dt``
    (the violation is an O(dt) artifact that must shrink with dt).
    """
    scale = max(1.0, float(np.max(series["l2_u"])) ** 2)
    viol = max(0.0, float(np.max(energy_residuals(series, model), initial=0.0)))
    if series_half is None:
        return EnergyResult(viol <= atol * scale, viol)
    viol_h = max(0.0, float(np.max(energy_residuals(series_half, model), initial=0.0)))
    ok = viol_h <= halving_factor * viol + atol * scale
    ratio = viol_h / viol if viol > 0 else None
    return EnergyResult(ok, viol, viol_h, ratio)


def check_nonnegativity(series, initial_linf, rtol=1e-10):
    """Pre-clipping minima of u and v stay above ``-rtol (1 + initial linf)``."""
    worst = float(min(np.min(series["min_u"]), np.min(series["min_v"])))
    return worst >= -rtol * (1.0 + initial_linf), worst


def check_mass_identity(series, measure, rtol=1e-12):
    """Per-step ``|int u' - int u - dt int u f| <= rtol |Omega| linf(u)``."""
    res = np.abs(series["mass_residual"][1:])
    scale = measure * np.maximum(series["linf_u"][:-1], 1e-300)
    rel = res / scale
    worst = float(np.max(rel, initial=0.0))
    return worst <= rtol, worst


# ---------------------------------------------------------------------------
# stability


def default_lambda(model):
    dif = model.diffusivity
    return 2.0 * (dif.a2**2 / (dif.a0 * model.d_v) + dif.a0 / (4.0 * model.d_v))


def default_dual_weight(model):
    dif = model.diffusivity
    return 16.0 * (dif.a2**2 / (dif.a0 * model.d_v) + 1.0)


def fit_gronwall(times, D, floor=1e-30):
    """Least-squares line through ``log D(t)`` where ``D > floor``; returns ``(K, intercept)``."""
    times = np.asarray(times, dtype=float)
    D = np.asarray(D, dtype=float)
    keep = D > floor
    if keep.sum() < 2:
        return 0.0, (float(np.log(D[keep][0])) if keep.any() else float("-inf"))
    K, c = np.polyfit(times[keep], np.log(D[keep]), 1)
    return float(K), float(c)


@dataclass
class StabilityReport:
    lam: float
    times: np.ndarray
    D: np.ndarray
    K: float
    c_stab: float
    sup_ratio: float
    gradient_integral: np.ndarray
    reference_norms: dict = field(default_factory=dict)
    kind: str = "L2"

    def bound(self):
        """The fitted Gronwall envelope ``c_stab exp(K t) D(0)``."""
        return self.c_stab * np.exp(self.K * self.times) * self.D[0]


def _collect(model, config, u0, v0, stride):
    frames = []
    count = [0]

    def obs(state):
        if count[0] % stride == 0 or abs(state.t - config.t_end) < 1e-12 * config.t_end:
            frames.append((state.t, state.u.values.copy(), state.v.values.copy()))
        count[0] += 1

    res = run(model, config, u0, v0, observers=[obs])
    return frames, res


def _initial_pairs(pair, perturbation, second):
    if (perturbation is None) == (second is None):
        raise ValueError("give exactly one of perturbation or second")
    if second is None:
        du, dv = perturbation
        second = pair
        pair = (pair[0] + du, pair[1] + dv)
    for u, v in (pair, second):
        if u.min() < 0 or v.min() < 0:
            raise ValueError("initial data of a stability pair must be nonnegative")
    return pair, second


def _paired_frames(model, config, first, second, stride):
    if stride is None:
        stride = max(1, int(round(config.t_end / config.dt)) // 400)
    f1, _ = _collect(model, config, first[0], first[1], stride)
    f2, _ = _collect(model, config, second[0], second[1], stride)
    if len(f1) != len(f2) or any(abs(a[0] - b[0]) > 1e-12 for a, b in zip(f1, f2)):
        raise RuntimeError("paired runs took different time steps; reduce dt")
    return f1, f2


def _reference_norms(grid, frames):
    us = [gf.Field(grid, f[1]) for f in frames]
    vs = [gf.Field(grid, f[2]) for f in frames]
    t = np.array([f[0] for f in frames])
    grad_v_inf = np.array([max(np.max(np.abs(np.diff(v.values, axis=k))) / h
                               for k, h in enumerate(grid.h)) for v in vs])
    return {
        "linf_u2": max(gf.linf(u) for u in us),
        "linf_v2": max(gf.linf(v) for v in vs),
        "grad_l4_u2": max(gf.grad_l4(u) for u in us),
        "grad_linf_v2_L2t": float(np.sqrt(_trapezoid(grad_v_inf**2, t))) if len(t) > 1 else 0.0,
    }


def _finish(kind, lam, times, D, grad_sq, refs):
    times = np.asarray(times)
    D = np.asarray(D)
    K, _ = fit_gronwall(times, D)
    if D[0] > 0:
        c_stab = float(np.max(D / (np.exp(K * times) * D[0])))
        sup_ratio = float(np.max(D) / D[0])
    else:
        c_stab = 0.0
        sup_ratio = 0.0 if not np.any(D > 0) else np.inf
    grad_int = np.concatenate([[0.0], np.cumsum(0.5 * (grad_sq[1:] + grad_sq[:-1]) * np.diff(times))])
    return StabilityReport(lam=lam, times=times, D=D, K=K, c_stab=c_stab, sup_ratio=sup_ratio,
                           gradient_integral=grad_int, reference_norms=refs, kind=kind)


def stability_experiment(model, config, pair, perturbation=None, lam=None, stride=None, second=None):
    """Run two solutions and fit ``D = ||u1 - u2||^2 + lam ||v1 - v2||^2``.

    ``pair`` is the initial ``(u, v)``. Either ``perturbation`` is given, and
    the runs start from ``pair + perturbation`` and ``pair``, or ``second`` is
    given, and they start from ``pair`` and ``second``. The second solution is
    the reference whose norms are recorded alongside the fit.
    """
    lam = default_lambda(model) if lam is None else float(lam)
    grid = pair[0].grid
    first, second = _initial_pairs(pair, perturbation, second)
    f1, f2 = _paired_frames(model, config, first, second, stride)
    times, D, grad_sq = [], [], []
    for (t, u1, v1), (_, u2, v2) in zip(f1, f2):
        du = gf.Field(grid, u1 - u2)
        dv = gf.Field(grid, v1 - v2)
        times.append(t)
        D.append(gf.l2_norm(du) ** 2 + lam * gf.l2_norm(dv) ** 2)
        grad_sq.append(gf.grad_l2_squared(du) + gf.grad_l2_squared(dv))
    return _finish("L2", lam, times, D, np.array(grad_sq), _reference_norms(grid, f2))


def dual_functional(du, dv, weight, tol=1e-10):
    """``||grad phi||^2 + weight ||grad psi||^2 + |Omega| (mean(du)^2 + mean(dv)^2)``."""
    phi = gf.neumann_poisson(du, tol=tol)
    psi = gf.neumann_poisson(dv, tol=tol)
    meas = du.grid.measure
    return (gf.grad_l2_squared(phi) + weight * gf.grad_l2_squared(psi)
            + meas * (gf.mean(du) ** 2 + gf.mean(dv) ** 2))


def dual_stability_experiment(model, config, pair, perturbation=None, M_weight=None, stride=None,
                              second=None):
    """Same pairing as :func:`stability_experiment` measured in the (H^1)' functional."""
    weight = default_dual_weight(model) if M_weight is None else float(M_weight)
    grid = pair[0].grid
    first, second = _initial_pairs(pair, perturbation, second)
    f1, f2 = _paired_frames(model, config, first, second, stride)
    times, D, l2_sq = [], [], []
    for (t, u1, v1), (_, u2, v2) in zip(f1, f2):
        du = gf.Field(grid, u1 - u2)
        dv = gf.Field(grid, v1 - v2)
        times.append(t)
        D.append(dual_functional(du, dv, weight))
        l2_sq.append(gf.l2_norm(du) ** 2 + gf.l2_norm(dv) ** 2)
    return _finish("H1'", weight, times, D, np.array(l2_sq), _reference_norms(grid, f2))


# ---------------------------------------------------------------------------
# linear parabolic bounds


def _at(coef, t):
    return coef(t) if callable(coef) else coef


@dataclass
class AppendixReport:
    passed: bool
    worst_ratio: float
    times: np.ndarray
    linf: np.ndarray
    bound: np.ndarray
    dtb_l2: float
    grad_l2_sup: float
    lap_l2: float
    rb_l2: float


def appendix_bound_check(gamma, r, b0, dt, t_end, rtol=1e-8, tol=1e-12):
    """March ``db/dt - gamma Lap b = r b`` and compare with ``linf(b0) exp(int sup r)``.

    ``gamma`` and ``r`` are fields, scalars, or callables of time returning
    either. Also reports the quantities bounded by the multiplier estimate
    (``||db/dt||``, ``sup_t ||grad b||``, ``||Lap b||``, ``||r b||``).
    """
    grid = b0.grid
    n = int(np.ceil(t_end / dt - 1e-9))
    b = b0.copy()
    base = gf.linf(b0)
    times, linfs, bounds = [0.0], [base], [base]
    expo = 0.0
    dtb_sq = lap_sq = rb_sq = 0.0
    grad_sup = gf.grad_l2(b)
    t = 0.0
    for k in range(n):
        h = min(dt, t_end - t)
        g_now, r_now = _at(gamma, t), _at(r, t)
        r_vals = r_now.values if isinstance(r_now, gf.Field) else np.full(grid.shape, float(r_now))
        b_next = step_linear_parabolic(b, g_now, r_now, h, tol=tol)
        expo += h * float(np.max(r_vals))
        t += h
        dtb_sq += h * gf.l2_norm((b_next - b) / h) ** 2
        lap_sq += h * gf.l2_norm(gf.laplacian_neumann(b_next)) ** 2
        rb_sq += h * gf.l2_norm(gf.Field(grid, r_vals * b.values)) ** 2
        b = b_next
        grad_sup = max(grad_sup, gf.grad_l2(b))
        times.append(t)
        linfs.append(gf.linf(b))
        bounds.append(base * np.exp(expo))
    linfs, bounds = np.array(linfs), np.array(bounds)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(bounds > 0, linfs / bounds, np.where(linfs > 0, np.inf, 0.0))
    worst = float(np.max(ratios))
    return AppendixReport(worst <= 1.0 + rtol, worst, np.array(times), linfs, bounds,
                          float(np.sqrt(dtb_sq)), float(grad_sup), float(np.sqrt(lap_sq)),
                          float(np.sqrt(rb_sq)))


def richardson(values, order=1, ratio=2.0):
    """Repeated Richardson extrapolation of values computed at ``dt, dt/ratio, ...``.

    The leading error terms are assumed to be ``dt^order, dt^(order+1), ...``;
    returns the fully extrapolated estimate.
    """
    col = [float(x) for x in values]
    p = order
    while len(col) > 1:
        fac = ratio**p
        col = [(fac * col[i + 1] - col[i]) / (fac - 1.0) for i in range(len(col) - 1)]
        p += 1
    return col[0]


# ---------------------------------------------------------------------------
# convergence studies


@dataclass
class ConvergenceReport:
    params: np.ndarray
    errors: np.ndarray
    order: float
    local_orders: np.ndarray
    asymptotic: bool
    kind: str = ""
    cauchy: bool = None


def fit_order(params, errors, tol=0.3):
    """Least-squares slope of ``log error`` against ``log param``."""
    params = np.asarray(params, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(params) < 3:
        raise ValueError("an order fit needs a ladder of at least 3 members")
    if np.any(errors <= 0):
        raise ValueError("errors must be positive for an order fit")
    p = float(np.polyfit(np.log(params), np.log(errors), 1)[0])
    local = np.diff(np.log(errors)) / np.diff(np.log(params))
    return p, local, bool(np.all(np.abs(local - p) <= tol))


def combined_l2(u1, v1, u2, v2):
    return float(np.sqrt(gf.l2_norm(u1 - u2) ** 2 + gf.l2_norm(v1 - v2) ** 2))


def grid_convergence(model, config, grids, initial, exact=None, dt_rule=None, norm="linf"):
    """Spatial refinement study over ``grids`` (coarse to fine, nested by factors of 2).

    ``initial(grid) -> (u0, v0)``. With ``exact(grid, t) -> u`` the error of
    ``u`` is measured against it; otherwise against the finest run restricted
    to each coarser grid (the finest member then drops out of the fit).
    ``dt_rule(h) -> dt`` ties the time step to the mesh.
    """
    results = []
    for g in grids:
        cfg = config if dt_rule is None else replace(config, dt=dt_rule(min(g.h)))
        u0, v0 = initial(g)
        results.append(run(model, cfg, u0, v0).state)
    measure = gf.linf if norm == "linf" else gf.l2_norm
    hs, errs = [], []
    if exact is not None:
        for g, st in zip(grids, results):
            hs.append(min(g.h))
            errs.append(measure(st.u - exact(g, st.t)))
    else:
        fine = results[-1]
        for g, st in zip(grids[:-1], results[:-1]):
            hs.append(min(g.h))
            errs.append(measure(st.u - gf.restrict(fine.u, g)))
    p, local, asym = fit_order(hs, errs)
    return ConvergenceReport(np.array(hs), np.array(errs), p, local, asym, kind="grid")


def dt_convergence(model, config, dts, u0, v0):
    """Temporal self-convergence at fixed mesh, errors against the smallest dt."""
    states = [run(model, replace(config, dt=dt), u0, v0).state for dt in dts]
    order = np.argsort(dts)[::-1]
    dts = np.asarray(dts, dtype=float)[order]
    states = [states[i] for i in order]
    ref = states[-1]
    errs = [combined_l2(s.u, s.v, ref.u, ref.v) for s in states[:-1]]
    p, local, asym = fit_order(dts[:-1], errs)
    return ConvergenceReport(dts[:-1], np.array(errs), p, local, asym, kind="dt")


def regularization_convergence(model, config, u0, v0, ladder, kind="eps"):
    """Cauchy test along an eps-ladder (mollification) or an M-ladder (truncation).

    Successive final-time differences ``d_k = ||(u, v)_k - (u, v)_{k+1}||_2``
    must decrease strictly; ``np.inf`` is allowed as the last M. ``eps = 0``
    means no mollification.
    """
    if kind not in ("eps", "M"):
        raise ValueError("kind must be 'eps' or 'M'")
    if len(ladder) < 3:
        raise ValueError("a Cauchy test needs a ladder of at least 3 members")
    finals = []
    for val in ladder:
        cfg = replace(config, eps=float(val)) if kind == "eps" else replace(config, truncation=float(val))
        finals.append(run(model, cfg, u0, v0).state)
    diffs = np.array([combined_l2(a.u, a.v, b.u, b.v) for a, b in zip(finals[:-1], finals[1:])])
    cauchy = bool(np.all(np.diff(diffs) < 0) and np.all(diffs > 0))
    params = np.asarray(ladder, dtype=float)[:-1]
    if kind == "eps" and np.all(diffs > 0) and np.all(params > 0) and len(diffs) >= 3:
        p, local, asym = fit_order(params, diffs)
    else:
        p, local, asym = float("nan"), np.array([]), False
    return ConvergenceReport(params, diffs, p, local, asym, kind=kind, cauchy=cauchy)
