"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` or directly as a script.
"""

import sys
import time

import numpy as np
import pytest

from crossdiff import grid as gf
from crossdiff import presets, verify
from crossdiff.config import preset_scenario
from crossdiff.grid import Grid
from crossdiff.model import ModelSpec, ReactionSpec, invert_A
from crossdiff.stepper import Scheme, SolverConfig, run

pytestmark = pytest.mark.acceptance


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail):
        with capsys.disabled():
            print(f"\nCRITERION {k} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    return emit


def cosine(grid, base, amp, k=1):
    (x,) = grid.centers()
    return grid.field(base + amp * np.cos(k * np.pi * x))


def test_criterion_01_heat_sanity(report):
    model = presets.heat_sanity()
    t_end = 0.1
    hs, errs = [], []
    start = time.perf_counter()
    for n in (64, 128, 256):
        g = Grid.uniform(n)
        h = g.h[0]
        u0 = cosine(g, 1.0, 1.0)
        res = run(model, SolverConfig(dt=t_end / round(t_end / (4 * h * h)), t_end=t_end,
                                      linear_tol=1e-13), u0, u0)
        (x,) = g.centers()
        exact = 1 + np.exp(-np.pi**2 * t_end) * np.cos(np.pi * x)
        hs.append(h)
        errs.append(float(np.max(np.abs(res.state.u.values - exact))))
    elapsed = time.perf_counter() - start
    p, _, _ = verify.fit_order(hs, errs)
    ok = p >= 1.9 and elapsed < 10.0
    report(1, ok, f"errors {', '.join(f'{e:.3e}' for e in errs)}; order {p:.3f} (>= 1.9); "
                  f"runtime {elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_02_max_principle(report):
    sc = preset_scenario("competition")
    u0, v0 = sc.initial_data()
    res = run(sc.model, sc.solver, u0, v0)
    comp = verify.check_max_principle(res.series, sc.model.reaction.C_g, gf.linf(v0))

    g = Grid.uniform(8)
    rea = ReactionSpec(lambda u, v: 0 * u, lambda u, v: 1.0 + 0 * u, 1.0, 1.0, 1.0, 1.0)
    model = ModelSpec(presets.constant_diffusivity(1.0), rea, d_v=1.0)
    devs = []
    for dt in (1e-4, 5e-5):
        r = run(model, SolverConfig(dt=dt, t_end=1.0), g.constant(1.0), g.constant(1.0))
        chk = verify.check_max_principle(r.series, 1.0, 1.0)
        devs.append(float(np.max(np.abs(1.0 - chk.ratios))))
    ratio = devs[0] / devs[1]
    ok = comp.passed and comp.worst_ratio <= 1 + 1e-8 and devs[0] <= 1e-3 and 1.8 <= ratio <= 2.2
    report(2, ok, f"competition worst ratio {comp.worst_ratio:.10f} (<= 1+1e-8); equality case "
                  f"|1-ratio| {devs[0]:.3e} at dt=1e-4 (<= 1e-3), halving factor {ratio:.3f} (~2)")
    assert ok


def test_criterion_03_nonnegativity(report):
    parts, ok = [], True
    for name in presets.MODELS:
        sc = preset_scenario(name)
        u0, v0 = sc.initial_data()
        res = run(sc.model, sc.solver, u0, v0)
        passed, worst = verify.check_nonnegativity(res.series, max(gf.linf(u0), gf.linf(v0)))
        ok &= passed
        parts.append(f"{name} min {worst:.3e}")
    report(3, ok, "; ".join(parts) + " (>= -1e-10 (1 + linf0))")
    assert ok


def test_criterion_04_mass_identity(report):
    g = Grid.uniform(32)
    u0, v0 = cosine(g, 1.0, 0.5), cosine(g, 0.6, 0.4, 2)
    parts, ok = [], True
    for name in ("competition", "starvation"):
        cfg = SolverConfig(dt=2e-4, t_end=0.1, scheme=Scheme.DIV_EXPLICIT)
        res = run(presets.get_model(name), cfg, u0, v0)
        passed, worst = verify.check_mass_identity(res.series, g.measure)
        ok &= passed
        parts.append(f"{name} worst relative residual {worst:.2e}")
    report(4, ok, "; ".join(parts) + " (<= 1e-12)")
    assert ok


def test_criterion_05_round_trip(report):
    rng = np.random.default_rng(2024)
    parts, ok = [], True
    for name in presets.MODELS:
        model = presets.get_model(name)
        box = presets.SCENARIOS[name]["box"]
        diff = model.diffusivity
        v = rng.uniform(*box[1], 10_000)
        a_max = diff.A(np.full_like(v, box[0][1]), v)
        a = rng.uniform(0.0, 1.0, v.shape) * a_max
        err = float(np.max(np.abs(diff.A(invert_A(diff, a, v), v) - a)))
        ok &= err <= 1e-12
        parts.append(f"{name} {err:.2e}")
    report(5, ok, "max |A(U(a,v),v) - a|: " + "; ".join(parts) + " (<= 1e-12)")
    assert ok


def test_criterion_06_scheme_equivalence(report):
    model = presets.competition()
    gaps = []
    ladder = ((64, 1e-4), (128, 5e-5), (256, 2.5e-5))
    for n, dt in ladder:
        g = Grid.uniform(n)
        u0, v0 = cosine(g, 1.0, 0.5), cosine(g, 0.6, 0.4, 2)
        base = SolverConfig(dt=dt, t_end=0.5, linear_tol=1e-13, nonlinear_tol=1e-12)
        a = run(model, base, u0, v0).state
        b = run(model, SolverConfig(dt=dt, t_end=0.5, linear_tol=1e-13, nonlinear_tol=1e-12,
                                    scheme=Scheme.DIV_IMPLICIT), u0, v0).state
        gaps.append(max(gf.linf(a.u - b.u), gf.linf(a.v - b.v)))
    p, _, _ = verify.fit_order([dt for _, dt in ladder], gaps)
    decreasing = bool(np.all(np.diff(gaps) < 0))
    ok = decreasing and p >= 1.0 and gaps[-1] <= 1e-3
    report(6, ok, f"l-inf gaps {', '.join(f'{x:.3e}' for x in gaps)}; observed order {p:.4f} (>= 1); "
                  f"gap at n=256 {gaps[-1]:.3e} (<= 1e-3)")
    assert ok


def _stability_pair(dual):
    model = presets.competition()
    g = Grid.uniform(64)
    u0, v0 = cosine(g, 1.0, 0.5), cosine(g, 0.6, 0.4, 2)
    (x,) = g.centers()
    du, dv = g.field(1e-2 * np.cos(np.pi * x)), g.field(1e-2 * np.cos(3 * np.pi * x))
    cfg = SolverConfig(dt=1e-3, t_end=1.0)
    exp = verify.dual_stability_experiment if dual else verify.stability_experiment
    full = exp(model, cfg, (u0, v0), (du, dv))
    half = exp(model, cfg, (u0, v0), (0.5 * du, 0.5 * dv))
    scaling = float(np.max(full.D) / np.max(half.D))
    finite = bool(np.isfinite(full.K) and np.isfinite(full.c_stab))
    envelope = bool(np.all(full.D <= full.bound() * (1 + 1e-12)))
    flat = bool(np.all(full.D <= full.c_stab * max(1.0, np.exp(full.K)) * full.D[0] * (1 + 1e-12)))
    ok = abs(scaling / 4 - 1) <= 0.2 and finite and envelope and flat
    detail = (f"scaling {scaling:.4f} (4 within 20%); K {full.K:.4f}, C_stab {full.c_stab:.4f} finite; "
              f"D(t) <= C_stab e^(Kt) D(0): {envelope}; sup D(t)/D(0) {np.max(full.D) / full.D[0]:.4f} "
              f"<= C_stab max(1, e^K): {flat}")
    return ok, detail


def test_criterion_07_stability(report):
    ok, detail = _stability_pair(False)
    report(7, ok, detail)
    assert ok


def test_criterion_08_dual_stability(report):
    ok, detail = _stability_pair(True)
    g = Grid.uniform(64)
    const_err = max(abs(gf.h1_dual_norm(g.constant(c)) - abs(c)) for c in (-2.5, 0.3, 1.0, 7.0))
    g256 = Grid.uniform(256)
    (x,) = g256.centers()
    cos_val = gf.h1_dual_norm(g256.field(np.cos(np.pi * x)), tol=1e-12)
    cos_err = abs(cos_val - 1 / (np.sqrt(2) * np.pi))
    ok = ok and const_err <= 1e-12 and cos_err <= 1e-3
    report(8, ok, f"{detail}; constants error {const_err:.1e} (<= 1e-12); "
                  f"dual norm of cos(pi x) {cos_val:.6f} vs {1 / (np.sqrt(2) * np.pi):.6f} (within 1e-3)")
    assert ok


def test_criterion_09_linear_parabolic_bound(report):
    g = Grid.uniform(16)
    r0, t_end = 0.5, 1.0
    finals = [verify.appendix_bound_check(1.0, r0, g.constant(1.0), dt, t_end).linf[-1]
              for dt in (1e-2, 5e-3, 2.5e-3, 1.25e-3)]
    extrap = verify.richardson(finals, order=1)
    rel = abs(extrap / np.exp(r0 * t_end) - 1)

    rng = np.random.default_rng(11)
    g = Grid.uniform(32)
    worst = 0.0
    for gamma_range in ((0.5, 2.0), (0.1, 10.0)):
        for _ in range(5):
            gamma = g.field(rng.uniform(*gamma_range, g.shape))
            r = g.field(rng.uniform(-1.0, 1.0, g.shape))
            b0 = g.field(rng.uniform(0.0, 1.0, g.shape))
            rep = verify.appendix_bound_check(gamma, r, b0, 1e-3, 0.5)
            worst = max(worst, rep.worst_ratio)
    ok = rel <= 1e-8 and worst <= 1 + 1e-8
    report(9, ok, f"equality case extrapolated relative error {rel:.2e} (<= 1e-8); "
                  f"randomized worst ratio {worst:.10f} (<= 1+1e-8)")
    assert ok


def test_criterion_10_regularization(report):
    g = Grid.uniform(64)
    cfg = SolverConfig(dt=1e-3, t_end=0.5)
    u0, v0 = cosine(g, 1.0, 0.5), cosine(g, 0.6, 0.4, 2)
    eps = verify.regularization_convergence(presets.competition(), cfg, u0, v0,
                                            [0.08, 0.04, 0.02, 0.01], kind="eps")
    # truncation at M only acts on data that exceed M
    big = ModelSpec(presets.competition_diffusivity(u_max=10.0), presets.competition_reaction(), d_v=1.0)
    trunc = verify.regularization_convergence(big, cfg, cosine(g, 5.0, 4.5), cosine(g, 5.0, 4.5, 2),
                                              [2.0, 4.0, 8.0, np.inf], kind="M")
    ok = eps.cauchy and trunc.cauchy
    report(10, ok, f"eps-ladder differences {', '.join(f'{d:.3e}' for d in eps.errors)}; "
                   f"M-ladder differences {', '.join(f'{d:.3e}' for d in trunc.errors)} (strictly shrinking)")
    assert ok


def test_criterion_11_energy(report):
    g = Grid.uniform(16)
    rea = ReactionSpec(lambda u, v: 1.0 + 0 * u, lambda u, v: 0 * u, 1.0, 1.0, 1.0, 1.0)
    tight = ModelSpec(presets.constant_diffusivity(1.0), rea, d_v=1.0)
    series = [run(tight, SolverConfig(dt=dt, t_end=1.0), g.constant(1.0), g.constant(1.0)).series
              for dt in (1e-2, 5e-3)]
    r = verify.check_energy_estimate(series[0], tight, series[1], halving_factor=0.6)

    sc = preset_scenario("competition")
    u0, v0 = sc.initial_data()
    comp = verify.check_energy_estimate(run(sc.model, sc.solver, u0, v0).series, sc.model)
    ok = r.passed and 0.4 <= r.ratio <= 0.6 and comp.passed
    report(11, ok, f"tight case violation {r.max_violation:.3e} -> {r.max_violation_half:.3e} "
                   f"(ratio {r.ratio:.3f}, halves); competition violation {comp.max_violation:.3e}")
    assert ok


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-p", "no:cacheprovider"]))
