"""Command-line entry point ``crossdiff``.

Exit status: 0 when the command succeeds and every check passes, 1 when a
check fails or the solver gives up, 2 on configuration or usage errors.
"""

import argparse
import csv
import os
import sys
from dataclasses import replace

import numpy as np

from . import grid as gf
from . import output, verify
from .config import parse_config, preset_scenario
from .errors import AssumptionViolation, CrossDiffError, ParseError
from .stepper import Scheme, run

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _add_scenario_args(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="preset name")
    src.add_argument("--config", help="scenario file")
    p.add_argument("--t-end", type=float)
    p.add_argument("--dt", type=float)
    p.add_argument("--n", type=int, help="cells per axis")
    p.add_argument("--scheme", choices=[s.value for s in Scheme])
    p.add_argument("--eps", type=float, help="mollifier width")
    p.add_argument("--truncation", type=float, help="truncation level M")
    p.add_argument("--out", default="out", help="output directory (default: out)")


def build_parser():
    parser = _Parser(prog="crossdiff", description="Triangular reaction cross-diffusion solver.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("run", help="integrate a scenario and write CSV, snapshots and plots")
    _add_scenario_args(p)
    p.add_argument("--snapshot-times", type=float, nargs="+")

    p = sub.add_parser("verify", help="run a scenario and evaluate its checks")
    _add_scenario_args(p)

    for name, helptext in (("stability", "L2 stability of a perturbed pair"),
                           ("dual-stability", "stability in the dual H1 functional")):
        p = sub.add_parser(name, help=helptext)
        _add_scenario_args(p)
        p.add_argument("--rho", type=float, default=1e-2, help="perturbation amplitude")
        p.add_argument("--weight", type=float, help="lambda (L2) or M (dual) override")
        p.add_argument("--scaling-tol", type=float, default=0.2)

    p = sub.add_parser("convergence", help="grid or time-step refinement study")
    _add_scenario_args(p)
    p.add_argument("--kind", choices=("grid", "dt"), default="dt")
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--min-order", type=float)

    p = sub.add_parser("regularize-study", help="Cauchy test along an eps- or M-ladder")
    _add_scenario_args(p)
    p.add_argument("--kind", choices=("eps", "M"), default="eps")
    p.add_argument("--ladder", type=float, nargs="+")

    p = sub.add_parser("appendix-check", help="sup bound for the scalar linear parabolic problem")
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--dim", type=int, choices=(1, 2), default=1)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--t-end", type=float, default=0.5)
    p.add_argument("--gamma-range", type=float, nargs=2, default=(0.5, 2.0))
    p.add_argument("--r-range", type=float, nargs=2, default=(-1.0, 1.0))
    p.add_argument("--r0", type=float, default=0.5, help="rate of the equality case")
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="out")
    return parser


def _overrides(args):
    o = {"solver": {}, "grid": {}}
    for key, section, name in (("t_end", "solver", "t_end"), ("dt", "solver", "dt"),
                               ("scheme", "solver", "scheme"), ("eps", "solver", "eps"),
                               ("truncation", "solver", "truncation"), ("n", "grid", "n")):
        val = getattr(args, key, None)
        if val is not None:
            o[section][name] = val
    snaps = getattr(args, "snapshot_times", None)
    if snaps:
        o["output"] = {"snapshot_times": " ".join(repr(t) for t in snaps)}
    return o


def load_scenario(args):
    o = _overrides(args)
    try:
        if args.scenario:
            return preset_scenario(args.scenario, o)
        if not os.path.exists(args.config):
            raise ParseError(f"config file not found: {args.config}")
        return parse_config(args.config, o)
    except ValueError as exc:
        raise ParseError(str(exc)) from None


def _say(line):
    print(line, flush=True)


def _finish(outdir, name, lines, ok):
    os.makedirs(outdir, exist_ok=True)
    lines = list(lines) + [f"OVERALL {'PASS' if ok else 'FAIL'}"]
    output.write_summary(os.path.join(outdir, f"{name}_summary.txt"), lines)
    _say(lines[-1])
    return EXIT_OK if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# subcommands


def cmd_run(args):
    sc = load_scenario(args)
    u0, v0 = sc.initial_data()
    res = run(sc.model, sc.solver, u0, v0, snapshot_times=sc.snapshot_times)
    paths = output.write_run_artifacts(args.out, res, prefix=sc.name)
    s = res.series
    _say(f"scenario {sc.name}: {len(s) - 1} steps to t={res.state.t:.6g}")
    _say(f"final linf_u={s['linf_u'][-1]:.6g} linf_v={s['linf_v'][-1]:.6g} "
         f"mass_u={s['mass_u'][-1]:.6g} mass_v={s['mass_v'][-1]:.6g}")
    for p in paths:
        _say(f"wrote {p}")
    return EXIT_OK


def evaluate_checks(sc, res, half=None):
    """Per-check ``(name, passed, detail)`` for a finished run of scenario ``sc``."""
    s = res.series
    out = []
    for check in sc.checks:
        if check == "max_principle":
            r = verify.check_max_principle(s, sc.model.reaction.C_g, gf.linf(res.initial.v))
            out.append((check, r.passed, f"worst ratio {r.worst_ratio:.10g}"))
        elif check == "nonnegativity":
            init = max(gf.linf(res.initial.u), gf.linf(res.initial.v))
            ok, worst = verify.check_nonnegativity(s, init)
            out.append((check, ok, f"minimum {worst:.3e}"))
        elif check == "energy":
            r = verify.check_energy_estimate(s, sc.model)
            if not r.passed and half is not None:
                r = verify.check_energy_estimate(s, sc.model, half(), halving_factor=0.6)
                detail = f"violation {r.max_violation:.3e}, at dt/2 {r.max_violation_half:.3e}"
            else:
                detail = f"violation {r.max_violation:.3e}"
            out.append((check, r.passed, detail))
        elif check == "mass":
            if sc.solver.scheme is not Scheme.DIV_EXPLICIT:
                out.append((check, True, "skipped: exact only for div-explicit"))
                continue
            ok, worst = verify.check_mass_identity(s, sc.grid.measure)
            out.append((check, ok, f"worst relative residual {worst:.3e}"))
    return out


def cmd_verify(args):
    sc = load_scenario(args)
    u0, v0 = sc.initial_data()
    res = run(sc.model, sc.solver, u0, v0)

    def half():
        cfg = replace(sc.solver, dt=0.5 * sc.solver.dt)
        return run(sc.model, cfg, u0, v0).series

    lines = [f"scenario {sc.name}"] + [c.line() for c in sc.assumptions.checks]
    ok = True
    for name, passed, detail in evaluate_checks(sc, res, half):
        ok &= passed
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")
    for line in lines[1 + len(sc.assumptions.checks):]:
        _say(line)
    os.makedirs(args.out, exist_ok=True)
    res.series.to_csv(os.path.join(args.out, f"{sc.name}.csv"))
    return _finish(args.out, f"{sc.name}_verify", lines, ok)


def _perturbation(grid, rho):
    prof = np.ones(grid.shape)
    for x, ext in zip(grid.centers(), grid.extents):
        prof = prof * 0.5 * (1.0 + np.cos(np.pi * x / ext))
    return grid.field(rho * prof), grid.field(rho * prof)


def _write_stability_csv(path, rep):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t", "D", "bound", "gradient_integral"))
        for row in zip(rep.times, rep.D, rep.bound(), rep.gradient_integral):
            w.writerow([repr(float(x)) for x in row])


def _cmd_stability(args, dual):
    sc = load_scenario(args)
    u0, v0 = sc.initial_data()
    du, dv = _perturbation(sc.grid, args.rho)
    exp = verify.dual_stability_experiment if dual else verify.stability_experiment
    key = "M_weight" if dual else "lam"
    kw = {key: args.weight}
    rep = exp(sc.model, sc.solver, (u0, v0), (du, dv), **kw)
    rep_half = exp(sc.model, sc.solver, (u0, v0), (0.5 * du, 0.5 * dv), **kw)
    scaling = float(np.max(rep.D) / np.max(rep_half.D)) if np.max(rep_half.D) > 0 else np.inf
    scaling_ok = abs(scaling / 4.0 - 1.0) <= args.scaling_tol
    finite = bool(np.isfinite(rep.K) and np.isfinite(rep.c_stab))
    bounded = bool(np.all(rep.D <= rep.sup_ratio * rep.D[0] * (1 + 1e-12)))
    tag = "dual" if dual else "l2"
    lines = [
        f"scenario {sc.name} ({rep.kind} functional, weight {rep.lam:.6g}, rho {args.rho:g})",
        f"{'PASS' if finite else 'FAIL'} gronwall fit: K={rep.K:.6g}, C_stab={rep.c_stab:.6g}",
        f"{'PASS' if bounded else 'FAIL'} D(t) <= C D(0) with C=sup D/D(0)={rep.sup_ratio:.6g}",
        f"{'PASS' if scaling_ok else 'FAIL'} sup D(rho)/sup D(rho/2) = {scaling:.6g} (target 4)",
    ]
    lines += [f"reference {k} = {v:.6g}" for k, v in rep.reference_norms.items()]
    for line in lines:
        _say(line)
    os.makedirs(args.out, exist_ok=True)
    _write_stability_csv(os.path.join(args.out, f"{sc.name}_{tag}_stability.csv"), rep)
    output.write_text(os.path.join(args.out, f"{sc.name}_{tag}_stability.svg"),
                      output.svg_lines(rep.times, {"D": rep.D, "fitted envelope": rep.bound()},
                                       title=f"{rep.kind} distance", xlabel="t"))
    return _finish(args.out, f"{sc.name}_{tag}_stability", lines, finite and bounded and scaling_ok)


def cmd_convergence(args):
    sc = load_scenario(args)
    if args.levels < 3:
        raise ParseError("--levels must be at least 3")
    if args.kind == "dt":
        u0, v0 = sc.initial_data()
        dts = [sc.solver.dt / 2**k for k in range(args.levels + 1)]
        rep = verify.dt_convergence(sc.model, sc.solver, dts, u0, v0)
        target = 0.9 if args.min_order is None else args.min_order
    else:
        n0 = sc.grid.cells[0]
        grids = [gf.Grid(sc.grid.extents, tuple(c * 2**k for c in sc.grid.cells))
                 for k in range(args.levels + 1)]
        h0 = min(sc.grid.h)

        def initial(g):
            return sc.initial_u.build(g), sc.initial_v.build(g)

        rep = verify.grid_convergence(sc.model, sc.solver, grids, initial,
                                      dt_rule=lambda h: sc.solver.dt * (h / h0) ** 2)
        target = 1.9 if args.min_order is None else args.min_order
        _say(f"grid ladder from n={n0}, dt scaled with h^2")
    ok = rep.order >= target
    lines = [f"scenario {sc.name}: {args.kind} refinement"]
    lines += [f"  {p:.6g}  error {e:.6e}" for p, e in zip(rep.params, rep.errors)]
    lines.append(f"{'PASS' if ok else 'FAIL'} fitted order {rep.order:.4f} (target >= {target})")
    for line in lines:
        _say(line)
    return _finish(args.out, f"{sc.name}_{args.kind}_convergence", lines, ok)


def cmd_regularize(args):
    sc = load_scenario(args)
    if args.ladder:
        ladder = list(args.ladder)
    else:
        ladder = [0.08, 0.04, 0.02, 0.01] if args.kind == "eps" else [2.0, 4.0, 8.0, np.inf]
    u0, v0 = sc.initial_data()
    rep = verify.regularization_convergence(sc.model, sc.solver, u0, v0, ladder, kind=args.kind)
    lines = [f"scenario {sc.name}: {args.kind}-ladder {ladder}"]
    lines += [f"  {a:g} -> {b:g}: l2 difference {d:.6e}"
              for a, b, d in zip(ladder[:-1], ladder[1:], rep.errors)]
    if not np.any(rep.errors > 0):
        lines.append("note: all runs coincide, so the ladder never acts on this data")
    lines.append(f"{'PASS' if rep.cauchy else 'FAIL'} successive differences shrink")
    for line in lines:
        _say(line)
    return _finish(args.out, f"{sc.name}_{args.kind}_regularize", lines, rep.cauchy)


def cmd_appendix(args):
    if args.n < 2 or not (args.dt > 0 and args.t_end > 0):
        raise ParseError("need n >= 2 and positive dt, t-end")
    g0, g1 = args.gamma_range
    r0, r1 = args.r_range
    if not 0 < g0 <= g1 or r0 > r1:
        raise ParseError("need 0 < gamma_min <= gamma_max and r_min <= r_max")
    grid = gf.Grid.uniform(args.n, dim=args.dim)
    rng = np.random.default_rng(args.seed)
    lines, ok = [], True
    for k in range(args.trials):
        gamma = grid.field(rng.uniform(g0, g1, grid.shape))
        r = grid.field(rng.uniform(r0, r1, grid.shape))
        b0 = grid.field(rng.uniform(0.0, 1.0, grid.shape))
        rep = verify.appendix_bound_check(gamma, r, b0, args.dt, args.t_end)
        ok &= rep.passed
        lines.append(f"{'PASS' if rep.passed else 'FAIL'} random trial {k}: worst ratio {rep.worst_ratio:.10g}")
    dts = [args.dt / 2**k for k in range(4)]
    finals = [verify.appendix_bound_check(1.0, args.r0, grid.constant(1.0), dt, args.t_end).linf[-1]
              for dt in dts]
    extrap = verify.richardson(finals, order=1)
    exact = np.exp(args.r0 * args.t_end)
    rel = abs(extrap / exact - 1.0)
    eq_ok = rel <= 1e-8
    ok &= eq_ok
    lines.append(f"{'PASS' if eq_ok else 'FAIL'} equality case r={args.r0:g}: extrapolated "
                 f"{extrap:.12g} vs {exact:.12g} (relative {rel:.2e})")
    for line in lines:
        _say(line)
    return _finish(args.out, "appendix", lines, ok)


COMMANDS = {
    "run": cmd_run,
    "verify": cmd_verify,
    "stability": lambda a: _cmd_stability(a, dual=False),
    "dual-stability": lambda a: _cmd_stability(a, dual=True),
    "convergence": cmd_convergence,
    "regularize-study": cmd_regularize,
    "appendix-check": cmd_appendix,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"crossdiff: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (ParseError, AssumptionViolation) as exc:
        print(f"crossdiff: configuration error: {exc}", file=sys.stderr)
        if isinstance(exc, AssumptionViolation):
            print(exc.report.summary(), file=sys.stderr)
        return EXIT_CONFIG
    except (CrossDiffError, ValueError, RuntimeError) as exc:
        print(f"crossdiff: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
