"""Scenario files: INI-style sections parsed with :mod:`configparser`.

Sections and keys (all optional when ``[scenario] preset`` names a preset):

``[scenario]``  ``name``, ``preset``
``[model]``     ``B``, ``f``, ``g`` (expressions); ``d1A``, ``d2A``, ``d2B`` (optional
                closed forms); ``d_v``, ``a0``..``a3``, ``C_f``, ``C_f_prime``, ``C_g``,
                ``C_g_prime`` (numbers); ``box_u``, ``box_v`` (two numbers each)
``[grid]``      ``dim``, ``n`` or ``cells``, ``extent``
``[solver]``    ``scheme``, ``dt``, ``t_end``, ``linear_tol``, ``nonlinear_tol``,
                ``invert_tol``, ``truncation``, ``eps``, ``cfl_safety``, ``max_halvings``
``[initial]``   ``u``, ``v``: ``constant c`` | ``cosine base amp k`` |
                ``random base amp seed`` | ``file path``
``[verify]``    ``checks``: comma separated names
``[output]``    ``snapshot_times``: numbers separated by commas or blanks
"""

import configparser
import math
import os
import re
from dataclasses import dataclass, field

import numpy as np

from . import grid as gf
from . import presets
from .errors import AssumptionViolation, ParseError
from .expr import parse_expression
from .model import DiffusivitySpec, ModelSpec, ReactionSpec, check_assumptions
from .stepper import Scheme, SolverConfig

SECTIONS = ("scenario", "model", "grid", "solver", "initial", "verify", "output")
CHECKS = ("max_principle", "nonnegativity", "energy", "mass")
MODEL_NUMBERS = ("d_v", "a0", "a1", "a2", "a3", "C_f", "C_f_prime", "C_g", "C_g_prime")
MODEL_EXPRESSIONS = ("B", "f", "g")
MODEL_OPTIONAL = ("d1A", "d2A", "d2B")
SCHEME_ALIASES = {
    "nondiv": Scheme.NONDIV, "nondivergenceimex": Scheme.NONDIV,
    "div-explicit": Scheme.DIV_EXPLICIT, "divergenceexplicit": Scheme.DIV_EXPLICIT,
    "div-implicit": Scheme.DIV_IMPLICIT, "divergenceimplicit": Scheme.DIV_IMPLICIT,
}
SOLVER_DEFAULTS = {
    "scheme": "nondiv", "linear_tol": "1e-10", "nonlinear_tol": "1e-10", "invert_tol": "1e-12",
    "truncation": "inf", "eps": "0", "cfl_safety": "0.9", "max_halvings": "20",
}
GRID_DEFAULTS = {"dim": "1", "extent": "1.0"}
DEFAULT_CHECKS = "max_principle, nonnegativity, energy"

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^([^\s=:;#][^=:]*?)\s*[=:]\s*")


@dataclass(frozen=True)
class Entry:
    """A raw value with its position in the source (``line`` is None for defaults)."""

    value: str
    line: int = None
    column: int = None

    def error(self, message):
        return ParseError(message, self.line, self.column)


@dataclass(frozen=True)
class InitialSpec:
    kind: str
    params: tuple = ()
    path: str = None

    def build(self, grid):
        if self.kind == "constant":
            return grid.constant(self.params[0])
        if self.kind == "cosine":
            base, amp, k = self.params
            prof = np.ones(grid.shape)
            for x, ext in zip(grid.centers(), grid.extents):
                prof = prof * np.cos(k * np.pi * x / ext)
            return grid.field(base + amp * prof)
        if self.kind == "random":
            base, amp, seed = self.params
            rng = np.random.default_rng(int(seed))
            return grid.field(base + amp * rng.uniform(-1.0, 1.0, grid.shape))
        fld, _ = gf.read_snapshot(self.path)
        if fld.grid != grid:
            raise ValueError(f"snapshot {self.path} lives on {fld.grid}, expected {grid}")
        return fld


@dataclass
class Scenario:
    name: str
    model: ModelSpec
    grid: gf.Grid
    solver: SolverConfig
    initial_u: InitialSpec
    initial_v: InitialSpec
    checks: tuple
    box: tuple
    snapshot_times: tuple = ()
    defaulted: list = field(default_factory=list)
    assumptions: object = None
    preset: str = None

    def initial_data(self):
        return self.initial_u.build(self.grid), self.initial_v.build(self.grid)


def _scan_positions(text):
    """Map ``(section, key) -> (line, column of value)`` by a plain line scan."""
    pos, section = {}, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        m = _SECTION_RE.match(raw)
        if m:
            section = m.group(1).strip().lower()
            pos[(section, None)] = (lineno, 1)
            continue
        m = _KEY_RE.match(raw)
        if m and section is not None:
            pos[(section, m.group(1).strip().lower())] = (lineno, m.end() + 1)
    return pos


def _read_sections(text):
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ParseError("content before the first [section]", exc.lineno, 1) from None
    except (configparser.DuplicateSectionError, configparser.DuplicateOptionError) as exc:
        raise ParseError(exc.message.split("\n")[0], exc.lineno, 1) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ParseError("malformed line", lineno, 1) from None
    pos = _scan_positions(text)
    sections = {}
    for sec in parser.sections():
        name = sec.strip().lower()
        if name not in SECTIONS:
            line, col = pos.get((name, None), (None, None))
            raise ParseError(f"unknown section [{sec}]", line, col)
        entries = {}
        for key, value in parser.items(sec):
            line, col = pos.get((name, key), (None, None))
            entries[key] = Entry(value.strip(), line, col)
        sections[name] = entries
    return sections, pos


def _section_error(pos, section, message):
    line, col = pos.get((section, None), (None, None))
    return ParseError(message, line, col)


def _require(sections, pos, section, key):
    entries = sections.get(section, {})
    if key.lower() not in entries:
        raise _section_error(pos, section, f"missing required key '{key}' in [{section}]")
    return entries[key.lower()]


def _number(entry, name, positive=False, nonneg=False, allow_inf=False):
    try:
        x = float(entry.value)
    except ValueError:
        raise entry.error(f"{name}: expected a number, got {entry.value!r}") from None
    if math.isnan(x) or (math.isinf(x) and not allow_inf):
        raise entry.error(f"{name}: must be finite")
    if positive and not x > 0:
        raise entry.error(f"{name}: must be positive")
    if nonneg and x < 0:
        raise entry.error(f"{name}: must be nonnegative")
    return x


def _integer(entry, name, minimum=None):
    try:
        n = int(entry.value)
    except ValueError:
        raise entry.error(f"{name}: expected an integer, got {entry.value!r}") from None
    if minimum is not None and n < minimum:
        raise entry.error(f"{name}: must be at least {minimum}")
    return n


def _numbers(entry, name, count=None):
    parts = [p for p in re.split(r"[,\s]+", entry.value) if p]
    if count is not None and len(parts) != count:
        raise entry.error(f"{name}: expected {count} numbers")
    out = []
    for p in parts:
        out.append(_number(Entry(p, entry.line, entry.column), name))
    return tuple(out)


def _expression(entry, name):
    if entry.line is None:
        return parse_expression(entry.value)
    try:
        return parse_expression(entry.value, entry.line, entry.column)
    except ParseError as exc:
        raise ParseError(f"{name}: {exc.message}", exc.line, exc.column) from None


def _inline_model(sections, pos, name):
    entries = sections.get("model", {})
    exprs = {k: _expression(_require(sections, pos, "model", k), k) for k in MODEL_EXPRESSIONS}
    nums = {k: _number(_require(sections, pos, "model", k), k, nonneg=True) for k in MODEL_NUMBERS}
    for k in ("d_v", "a0", "a1"):
        if not nums[k] > 0:
            raise entries[k.lower()].error(f"{k}: must be positive")
    optional = {k: _expression(entries[k.lower()], k) for k in MODEL_OPTIONAL if k.lower() in entries}
    dif = DiffusivitySpec(B=exprs["B"], a0=nums["a0"], a1=nums["a1"], a2=nums["a2"], a3=nums["a3"],
                          d1A_fn=optional.get("d1A"), d2A_fn=optional.get("d2A"),
                          d2B_fn=optional.get("d2B"))
    rea = ReactionSpec(f=exprs["f"], g=exprs["g"], C_f=nums["C_f"], C_f_prime=nums["C_f_prime"],
                       C_g=nums["C_g"], C_g_prime=nums["C_g_prime"])
    return ModelSpec(dif, rea, d_v=nums["d_v"], name=name)


def _initial(entry, key, base_dir):
    parts = entry.value.split()
    if not parts:
        raise entry.error(f"{key}: empty initial-data spec")
    kind = parts[0].lower()
    arity = {"constant": 1, "cosine": 3, "random": 3}
    if kind == "file":
        if len(parts) != 2:
            raise entry.error(f"{key}: expected 'file <path>'")
        path = parts[1] if os.path.isabs(parts[1]) else os.path.join(base_dir, parts[1])
        if not os.path.exists(path):
            raise entry.error(f"{key}: file not found: {parts[1]}")
        return InitialSpec("file", (), path)
    if kind not in arity:
        raise entry.error(f"{key}: unknown initial-data kind {parts[0]!r}")
    if len(parts) - 1 != arity[kind]:
        raise entry.error(f"{key}: '{kind}' takes {arity[kind]} number(s)")
    vals = tuple(_number(Entry(p, entry.line, entry.column), key) for p in parts[1:])
    if kind == "constant" and vals[0] < 0:
        raise entry.error(f"{key}: initial data must be nonnegative")
    if kind in ("cosine", "random") and vals[0] - abs(vals[1]) < 0:
        raise entry.error(f"{key}: base - |amp| must be nonnegative")
    if kind == "random" and (vals[2] != int(vals[2]) or vals[2] < 0):
        raise entry.error(f"{key}: seed must be a nonnegative integer")
    if kind == "cosine" and vals[2] != int(vals[2]):
        raise entry.error(f"{key}: cosine mode must be an integer")
    return InitialSpec(kind, vals)


def _preset_sections(preset):
    """Scenario defaults of a preset rendered as raw entries (no source position)."""
    sc = presets.SCENARIOS[preset]
    out = {
        "grid": {k: Entry(str(v)) for k, v in sc["grid"].items()},
        "solver": {k: Entry(str(v)) for k, v in sc["solver"].items()},
        "initial": {k: Entry(v) for k, v in sc["initial"].items()},
        "verify": {"checks": Entry(", ".join(sc["verify"]))},
        "model": {"box_u": Entry("%r %r" % sc["box"][0]), "box_v": Entry("%r %r" % sc["box"][1])},
    }
    return out


def _merge(sections, preset, overrides):
    merged = {}
    base = _preset_sections(preset) if preset else {}
    for sec in set(base) | set(sections) | set(overrides or {}):
        merged[sec] = dict(base.get(sec, {}))
        merged[sec].update(sections.get(sec, {}))
        for k, v in (overrides or {}).get(sec, {}).items():
            merged[sec][k.lower()] = Entry(str(v))
    return merged


def build_scenario(sections, pos=None, overrides=None, base_dir=".", source="<preset>"):
    """Validate raw ``sections`` (``{section: {key: Entry}}``) into a :class:`Scenario`."""
    pos = pos or {}
    scen = sections.get("scenario", {})
    preset = scen["preset"].value if "preset" in scen else None
    if preset is not None and preset not in presets.MODELS:
        raise scen["preset"].error(f"unknown preset {preset!r}; choose from {sorted(presets.MODELS)}")
    if preset is not None:
        extra = [k for k in sections.get("model", {}) if k not in ("box_u", "box_v")]
        if extra:
            e = sections["model"][extra[0]]
            raise e.error(f"[model] key '{extra[0]}' cannot modify preset {preset!r}; "
                          "remove the preset to define the model inline")
    name = scen["name"].value if "name" in scen else (preset or os.path.basename(source))
    sections = _merge(sections, preset, overrides)
    defaulted = []

    def get(section, key, defaults):
        entries = sections.setdefault(section, {})
        if key not in entries:
            entries[key] = Entry(defaults[key])
            defaulted.append(f"{section}.{key}={defaults[key]}")
        return entries[key]

    model = presets.get_model(preset) if preset else _inline_model(sections, pos, name)

    box_u = _numbers(_require(sections, pos, "model", "box_u"), "box_u", 2)
    box_v = _numbers(_require(sections, pos, "model", "box_v"), "box_v", 2)
    box = (box_u, box_v)
    if min(box_u + box_v) < 0 or box_u[1] < box_u[0] or box_v[1] < box_v[0]:
        raise sections["model"]["box_u"].error("box must be a nonempty subset of u, v >= 0")

    dim = _integer(get("grid", "dim", GRID_DEFAULTS), "dim", 1)
    if dim not in (1, 2):
        raise sections["grid"]["dim"].error("dim: must be 1 or 2")
    if "cells" in sections.get("grid", {}):
        cells = tuple(int(x) for x in _numbers(sections["grid"]["cells"], "cells", dim))
    else:
        cells = (_integer(_require(sections, pos, "grid", "n"), "n", 2),) * dim
    ext_entry = get("grid", "extent", GRID_DEFAULTS)
    extents = _numbers(ext_entry, "extent")
    if len(extents) == 1:
        extents = extents * dim
    if len(extents) != dim or min(extents) <= 0:
        raise ext_entry.error("extent: need one positive length or one per axis")
    if min(cells) < 2:
        raise ParseError("grid needs at least 2 cells per axis")
    grid = gf.Grid(extents, cells)

    scheme_entry = get("solver", "scheme", SOLVER_DEFAULTS)
    scheme = SCHEME_ALIASES.get(scheme_entry.value.lower())
    if scheme is None:
        raise scheme_entry.error(f"unknown scheme {scheme_entry.value!r}")
    dt = _number(_require(sections, pos, "solver", "dt"), "dt", positive=True)
    t_end = _number(_require(sections, pos, "solver", "t_end"), "t_end", positive=True)
    solver_kw = {}
    for key in ("linear_tol", "nonlinear_tol", "invert_tol"):
        solver_kw[key] = _number(get("solver", key, SOLVER_DEFAULTS), key, positive=True)
    solver_kw["truncation"] = _number(get("solver", "truncation", SOLVER_DEFAULTS), "truncation",
                                      positive=True, allow_inf=True)
    solver_kw["eps"] = _number(get("solver", "eps", SOLVER_DEFAULTS), "eps", nonneg=True)
    safety_entry = get("solver", "cfl_safety", SOLVER_DEFAULTS)
    solver_kw["cfl_safety"] = _number(safety_entry, "cfl_safety", positive=True)
    if solver_kw["cfl_safety"] > 1:
        raise safety_entry.error("cfl_safety: must lie in (0, 1]")
    solver_kw["max_halvings"] = _integer(get("solver", "max_halvings", SOLVER_DEFAULTS),
                                         "max_halvings", 0)
    solver = SolverConfig(dt=dt, t_end=t_end, scheme=scheme, **solver_kw)

    init_u = _initial(_require(sections, pos, "initial", "u"), "u", base_dir)
    init_v = _initial(_require(sections, pos, "initial", "v"), "v", base_dir)

    checks_entry = get("verify", "checks", {"checks": DEFAULT_CHECKS})
    checks = tuple(c.strip().lower() for c in checks_entry.value.split(",") if c.strip())
    for c in checks:
        if c not in CHECKS:
            raise checks_entry.error(f"unknown check {c!r}; choose from {', '.join(CHECKS)}")

    snaps = ()
    if "snapshot_times" in sections.get("output", {}):
        snaps = tuple(sorted(_numbers(sections["output"]["snapshot_times"], "snapshot_times")))
        if any(t < 0 or t > t_end for t in snaps):
            raise sections["output"]["snapshot_times"].error("snapshot times must lie in [0, t_end]")

    report = check_assumptions(model, box)
    if not report.passed:
        raise AssumptionViolation(report)
    return Scenario(name=name, model=model, grid=grid, solver=solver, initial_u=init_u,
                    initial_v=init_v, checks=checks, box=box, snapshot_times=snaps,
                    defaulted=defaulted, assumptions=report, preset=preset)


def parse_config_text(text, overrides=None, base_dir=".", source="<string>"):
    sections, pos = _read_sections(text)
    return build_scenario(sections, pos, overrides, base_dir, source)


def parse_config(path, overrides=None):
    """Read and validate a scenario file.

    ``overrides`` maps ``section -> {key: value}`` and wins over both the file
    and the preset defaults (the command line uses it).
    """
    with open(path) as fh:
        text = fh.read()
    return parse_config_text(text, overrides, os.path.dirname(os.path.abspath(path)), str(path))


def preset_scenario(name, overrides=None):
    """Scenario of a named preset with its default grid, solver and initial data."""
    if name not in presets.MODELS:
        raise ParseError(f"unknown preset {name!r}; choose from {sorted(presets.MODELS)}")
    return build_scenario({"scenario": {"preset": Entry(name)}}, overrides=overrides)
