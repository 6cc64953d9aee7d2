"""Scenario files: a small sectioned ``key = value`` format.

Example::

    # free packet on a line
    [run]
    kind = qhd-run
    seed = 7

    [chart]
    kind = flat-line
    lo = -8
    hi = 8
    cells = 256
    topology = open

    [initial]
    kind = gaussian
    sigma = 1.0

    [numerics]
    dt = 0.01
    steps = 200

Keys may also be written as absolute dotted paths (``chart.cells = 256``),
inside or outside a section.  Lists are comma separated and ``#`` starts a
comment.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import geometry as geo
from .errors import ConfigurationError

RUN_KINDS = ("sde-validate", "qhd-run", "nlse-run", "oracle-compare", "representability", "cosmo-sweep",
             "geometry-check")
CHART_KINDS = ("flat-line", "circle", "sphere2", "hyperbolic2", "bump2")
INITIAL_KINDS = ("gaussian", "exp-cos", "uniform", "plane-wave")
REQUIRED = object()


@dataclass(frozen=True)
class Key:
    type: str  # int, float, bool, str, choice, floats
    default: object = REQUIRED
    choices: tuple = ()
    lo: float = -math.inf
    hi: float = math.inf
    lo_open: bool = False
    doc: str = ""


SCHEMA = {
    "run.kind": Key("choice", REQUIRED, RUN_KINDS, doc="what to execute"),
    "run.seed": Key("int", 0, lo=0, doc="random seed, always recorded"),
    "run.out_dir": Key("str", "out"),
    "run.workers": Key("int", 1, lo=1),
    "run.tolerance_scale": Key("float", 1.0, lo=0, lo_open=True),
    "chart.kind": Key("choice", "flat-line", CHART_KINDS),
    "chart.radius": Key("float", 1.0, lo=0, lo_open=True),
    "chart.lo": Key("float", -1.0),
    "chart.hi": Key("float", 1.0),
    "chart.topology": Key("choice", "periodic", ("periodic", "reflective", "open")),
    "chart.cells": Key("int", 64, lo=4),
    "chart.n_theta": Key("int", 32, lo=4),
    "chart.n_phi": Key("int", 64, lo=4),
    "chart.n_chi": Key("int", 32, lo=4),
    "chart.chi_max": Key("float", 2.0, lo=0, lo_open=True),
    "chart.outer": Key("choice", "open", ("open", "reflective")),
    "chart.amplitude": Key("float", 0.5),
    "chart.width": Key("float", 0.5, lo=0, lo_open=True),
    "chart.half_size": Key("float", 3.0, lo=0, lo_open=True),
    "physics.hbar": Key("float", 1.0, lo=0),
    "physics.mass": Key("float", 1.0, lo=0, lo_open=True),
    "physics.eos": Key("choice", "dust", ("dust", "polytrope")),
    "physics.kappa": Key("float", 0.0, lo=0),
    "physics.index": Key("float", 2.0, lo=1, lo_open=True),
    "physics.gamma": Key("float", 0.0, doc="log nonlinearity on flat charts; curved charts use their own"),
    "physics.length_unit_m": Key("float", 1.0, lo=0, lo_open=True, doc="simulation length unit"),
    "physics.time_unit_s": Key("float", 1.0, lo=0, lo_open=True, doc="simulation time unit"),
    "initial.kind": Key("choice", "gaussian", INITIAL_KINDS),
    "initial.center": Key("floats", (0.0,)),
    "initial.sigma": Key("float", 1.0, lo=0, lo_open=True),
    "initial.beta": Key("float", 0.5),
    "initial.k": Key("floats", (1.0,)),
    "initial.flow": Key("float", 0.0, doc="amplitude a of the prescribed flow v = a sin(x) for sde-validate"),
    "numerics.dt": Key("float", 0.0),
    "numerics.steps": Key("int", 0, lo=0),
    "numerics.every": Key("int", 0, lo=0, doc="snapshot interval in steps; 0 means only first and last"),
    "numerics.walkers": Key("int", 10000, lo=1),
    "numerics.bins": Key("int", 32, lo=2),
    "numerics.direction": Key("choice", "forward", ("forward", "backward")),
    "numerics.renormalize": Key("bool", True),
    "numerics.qc": Key("bool", True),
    "numerics.cfl": Key("float", 0.4, lo=0, lo_open=True),
    "numerics.tolerance": Key("float", 1e-3, lo=0, lo_open=True),
    "cosmo.masses": Key("floats", (1.67e-27,)),
    "cosmo.hubbles": Key("floats", (2.2e-18,)),
    "cosmo.omegas": Key("floats", (0.1,)),
    "cosmo.lambda_obs": Key("float", 1e-52, lo=0, lo_open=True),
    "representability.expect": Key("choice", "any", ("any", "true", "false")),
}

# run kinds that integrate in time need a step and a step count
TIMED = ("sde-validate", "qhd-run", "nlse-run", "oracle-compare")


@dataclass(frozen=True)
class Scenario:
    values: dict
    given: frozenset = field(default=frozenset(), compare=False)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def kind(self) -> str:
        return self.values["run.kind"]

    def with_(self, **kw) -> "Scenario":
        vals = dict(self.values)
        for k, v in kw.items():
            vals[k.replace("__", ".")] = v
        return Scenario(vals, self.given)

    def section(self, name) -> dict:
        p = name + "."
        return {k[len(p):]: v for k, v in self.values.items() if k.startswith(p)}


class ScenarioError(ConfigurationError):
    """All problems found in a scenario file; ``errors`` holds ``(line, message)`` pairs."""

    def __init__(self, errors):
        self.errors = sorted(errors, key=lambda e: e[0])
        super().__init__("\n".join(f"line {n}: {m}" for n, m in self.errors))


def _convert(key, spec: Key, raw: str):
    raw = raw.strip()
    t = spec.type
    if t == "int":
        try:
            v = int(raw)
        except ValueError:
            raise ValueError(f"{key}: expected an integer, got {raw!r}") from None
    elif t == "float":
        try:
            v = float(raw)
        except ValueError:
            raise ValueError(f"{key}: expected a number, got {raw!r}") from None
        if not math.isfinite(v):
            raise ValueError(f"{key}: value must be finite")
    elif t == "bool":
        low = raw.lower()
        if low not in ("true", "false", "yes", "no", "on", "off", "1", "0"):
            raise ValueError(f"{key}: expected true or false, got {raw!r}")
        v = low in ("true", "yes", "on", "1")
    elif t == "choice":
        if raw not in spec.choices:
            raise ValueError(f"{key}: {raw!r} is not one of {', '.join(spec.choices)}")
        v = raw
    elif t == "floats":
        try:
            v = tuple(float(p) for p in raw.split(",") if p.strip())
        except ValueError:
            raise ValueError(f"{key}: expected comma-separated numbers, got {raw!r}") from None
        if not v:
            raise ValueError(f"{key}: empty list")
    else:
        v = raw
        if not v:
            raise ValueError(f"{key}: empty value")
    for x in (v if t == "floats" else (v,)):
        if t in ("int", "float", "floats"):
            if x < spec.lo or x > spec.hi or (spec.lo_open and x == spec.lo):
                op = ">" if spec.lo_open else ">="
                raise OverflowError(f"{key}: value {x:g} out of range (must be {op} {spec.lo:g})")
    return v


def parse_scenario(text: str) -> Scenario:
    """Parse and validate; raise :class:`ScenarioError` listing every problem."""
    errors, values, where, bad = [], {}, {}, set()
    section = ""
    last = 0
    for n, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        last = n
        if body.startswith("["):
            if not body.endswith("]") or not body[1:-1].strip():
                errors.append((n, f"malformed section header {body!r}"))
                continue
            section = body[1:-1].strip()
            if not any(k.startswith(section + ".") for k in SCHEMA):
                errors.append((n, f"unknown section [{section}]"))
            continue
        if "=" not in body:
            errors.append((n, f"expected 'key = value', got {body!r}"))
            continue
        k, raw = (s.strip() for s in body.split("=", 1))
        # section-relative first, then an absolute dotted path
        key = f"{section}.{k}" if section and f"{section}.{k}" in SCHEMA else k
        if key not in SCHEMA:
            errors.append((n, f"unknown key {(section + '.' + k) if section and '.' not in k else k!r}"))
            continue
        if key in where:
            errors.append((n, f"duplicate key {key!r} (first set on line {where[key]})"))
            continue
        where[key] = n
        try:
            values[key] = _convert(key, SCHEMA[key], raw)
        except OverflowError as exc:
            errors.append((n, f"out of range: {exc}"))
            bad.add(key)
        except ValueError as exc:
            errors.append((n, f"type mismatch: {exc}"))
            bad.add(key)
    given = frozenset(values)
    for key, spec in SCHEMA.items():
        if key in values:
            continue
        if spec.default is not REQUIRED:
            values[key] = spec.default
        elif key not in bad:
            errors.append((last, f"missing required key {key!r}"))
    if not errors:
        errors += _cross_checks(values, where, last)
    if errors:
        raise ScenarioError(errors)
    return Scenario(values, given)


def _cross_checks(v, where, last) -> list:
    errs = []
    kind = v["run.kind"]
    chart_line = where.get("chart.kind", where.get("run.kind", last))
    if kind in TIMED:
        for key in ("numerics.dt", "numerics.steps"):
            if key not in where:
                errs.append((last, f"missing required key {key!r} for run kind {kind}"))
        if v["numerics.steps"] == 0 and "numerics.steps" in where:
            errs.append((where["numerics.steps"], "out of range: numerics.steps must be >= 1 for a timed run"))
        dt = v["numerics.dt"]
        if "numerics.dt" in where:
            line = where["numerics.dt"]
            if kind == "sde-validate":
                fwd = v["numerics.direction"] == "forward"
                if dt == 0 or (dt > 0) != fwd:
                    errs.append((line, f"direction/sign error: dt={dt:g} for a {v['numerics.direction']} "
                                       f"sde run (forward needs dt > 0, backward dt < 0)"))
            elif not dt > 0:
                errs.append((line, f"out of range: numerics.dt must be > 0 for {kind}"))
    if kind in ("oracle-compare", "nlse-run") and v["chart.kind"] == "bump2":
        errs.append((chart_line, "representability error: bump2 has position-dependent Ricci curvature, so "
                                 "no Schroedinger oracle exists for it"))
    if kind == "sde-validate" and v["chart.kind"] not in ("circle", "flat-line"):
        errs.append((chart_line, "sde-validate supports the 1-D charts circle and flat-line"))
    if kind == "sde-validate" and v["chart.kind"] == "flat-line" and v["chart.topology"] != "periodic":
        errs.append((where.get("chart.topology", chart_line), "sde-validate on flat-line needs topology=periodic"))
    if kind == "sde-validate":
        n = v["chart.cells"]
        if n % v["numerics.bins"]:
            errs.append((where.get("numerics.bins", last), "out of range: chart.cells must be a multiple of "
                                                           "numerics.bins"))
    if v["chart.kind"] == "flat-line" and not v["chart.hi"] > v["chart.lo"]:
        errs.append((where.get("chart.hi", chart_line), "out of range: chart.hi must exceed chart.lo"))
    if v["chart.kind"] in ("flat-line", "circle") and len(v["initial.center"]) not in (1,):
        errs.append((where.get("initial.center", last), "out of range: 1-D charts take a single center"))
    if v["physics.eos"] == "polytrope" and "physics.kappa" not in where:
        errs.append((where.get("physics.eos", last), "missing required key 'physics.kappa' for a polytrope"))
    return errs


def echo(s: Scenario) -> str:
    """Canonical text with every key, defaults included; ``parse_scenario(echo(s)) == s``."""
    out, current = [], None
    for key in SCHEMA:
        sec, name = key.split(".", 1)
        if sec != current:
            if out:
                out.append("")
            out.append(f"[{sec}]")
            current = sec
        v = s.values[key]
        tag = "" if key in s.given else "  # default"
        out.append(f"{name} = {_render(v)}{tag}")
    return "\n".join(out) + "\n"


def _render(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def build_chart(s: Scenario) -> geo.Chart:
    c = s.section("chart")
    kind = c["kind"]
    if kind == "flat-line":
        return geo.Chart.flat_line(c["lo"], c["hi"], c["cells"], topology=c["topology"])
    if kind == "circle":
        return geo.Chart.circle(c["radius"], c["cells"])
    if kind == "sphere2":
        return geo.Chart.sphere2(c["radius"], c["n_theta"], c["n_phi"])
    if kind == "hyperbolic2":
        return geo.Chart.hyperbolic2(c["radius"], c["chi_max"], c["n_chi"], c["n_phi"], outer=c["outer"])
    return geo.Chart.bump2(c["amplitude"], c["width"], c["half_size"], c["cells"])


def load(path) -> Scenario:
    with open(path) as fh:
        return parse_scenario(fh.read())
