"""Run artifacts: diagnostics CSV, field snapshots, and standalone SVG plots."""

import os
from xml.sax.saxutils import escape

import numpy as np

from . import grid as gf

_W, _H = 640, 400
_MARGIN = (60, 20, 30, 50)  # left, right, top, bottom
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(x):
    return f"{x:.4g}"


def _range(values):
    lo, hi = float(np.min(values)), float(np.max(values))
    if not np.isfinite(lo) or not np.isfinite(hi):
        raise ValueError("cannot plot non-finite values")
    if hi == lo:
        pad = 0.5 * max(abs(lo), 1.0)
        return lo - pad, hi + pad
    return lo, hi


def svg_lines(x, series, title="", xlabel="", ylabel=""):
    """Line plot of ``series = {label: y}`` against ``x`` as an SVG string."""
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        raise ValueError("need at least two points to draw a line")
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    left, right, top, bottom = _MARGIN
    pw, ph = _W - left - right, _H - top - bottom
    x0, x1 = _range(x)
    y0, y1 = _range(np.concatenate(list(ys.values())))

    def px(xv):
        return left + (xv - x0) / (x1 - x0) * pw

    def py(yv):
        return top + (1.0 - (yv - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for frac in np.linspace(0.0, 1.0, 5):
        xv, yv = x0 + frac * (x1 - x0), y0 + frac * (y1 - y0)
        out.append(f'<text x="{px(xv):.1f}" y="{top + ph + 14}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<text x="{left - 4}" y="{py(yv) + 4:.1f}" text-anchor="end">{_fmt(yv)}</text>')
    for i, (label, y) in enumerate(ys.items()):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + 8}" y="{top + 14 + 14 * i}" fill="{color}">{escape(label)}</text>')
    if title:
        out.append(f'<text x="{_W / 2}" y="{top - 6}" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2}" y="{_H - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + ph / 2})">{escape(ylabel)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _ramp(t):
    """Blue-white-red ramp for ``t`` in [0, 1]."""
    t = float(np.clip(t, 0.0, 1.0))
    if t < 0.5:
        s = t / 0.5
        rgb = (int(59 + s * 196), int(76 + s * 179), int(192 + s * 63))
    else:
        s = (t - 0.5) / 0.5
        rgb = (255, int(255 - s * 200), int(255 - s * 215))
    return "#%02x%02x%02x" % rgb


def svg_heatmap(values, title=""):
    """Heatmap of a 2-D array (first index along x), with a min/max legend."""
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ValueError("heatmap needs a 2-D array")
    nx, ny = values.shape
    left, right, top, bottom = _MARGIN
    pw, ph = _W - left - right - 60, _H - top - bottom
    cw, ch = pw / nx, ph / ny
    lo, hi = _range(values)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
           f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{_W}" height="{_H}" fill="white"/>']
    for i in range(nx):
        for j in range(ny):
            color = _ramp((values[i, j] - lo) / (hi - lo))
            # y grows upward in the plot
            out.append(f'<rect x="{left + i * cw:.2f}" y="{top + (ny - 1 - j) * ch:.2f}" '
                       f'width="{cw + 0.05:.2f}" height="{ch + 0.05:.2f}" fill="{color}"/>')
    lx = left + pw + 20
    for k in range(20):
        out.append(f'<rect x="{lx}" y="{top + ph * k / 20:.2f}" width="15" height="{ph / 20 + 0.05:.2f}" '
                   f'fill="{_ramp(1.0 - k / 19)}"/>')
    out.append(f'<text x="{lx + 18}" y="{top + 10}">{_fmt(hi)}</text>')
    out.append(f'<text x="{lx + 18}" y="{top + ph}">{_fmt(lo)}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="{top - 6}" text-anchor="middle">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def write_run_artifacts(outdir, result, prefix="run"):
    """Write CSV, snapshots and plots of a :class:`~crossdiff.stepper.RunResult`; returns paths."""
    os.makedirs(outdir, exist_ok=True)
    paths = []
    csv_path = os.path.join(outdir, f"{prefix}.csv")
    result.series.to_csv(csv_path)
    paths.append(csv_path)
    for k, (t, u, v) in enumerate(result.snapshots):
        for name, fld in (("u", u), ("v", v)):
            p = os.path.join(outdir, f"{prefix}_{name}_{k:03d}.snap")
            gf.write_snapshot(p, fld, t)
            paths.append(p)
    s = result.series
    plots = {
        "norms": ({"linf_u": s["linf_u"], "linf_v": s["linf_v"], "l2_u": s["l2_u"], "l2_v": s["l2_v"]},
                  "norms"),
        "mass": ({"mass_u": s["mass_u"], "mass_v": s["mass_v"]}, "mass"),
    }
    if len(s) >= 2:
        for key, (ys, label) in plots.items():
            p = os.path.join(outdir, f"{prefix}_{key}.svg")
            write_text(p, svg_lines(s["t"], ys, title=f"{prefix}: {label}", xlabel="t"))
            paths.append(p)
    final = result.state
    for name, fld in (("u", final.u), ("v", final.v)):
        p = os.path.join(outdir, f"{prefix}_{name}_final.svg")
        if fld.grid.dim == 1:
            (x,) = fld.grid.centers()
            svg = svg_lines(x, {f"{name}(t={final.t:.4g})": fld.values}, title=f"{name} at t={final.t:.4g}",
                            xlabel="x")
        else:
            svg = svg_heatmap(fld.values, title=f"{name} at t={final.t:.4g}")
        write_text(p, svg)
        paths.append(p)
    return paths


def write_summary(path, lines):
    write_text(path, "\n".join(lines) + "\n")
