"""Execute a parsed scenario and write its artifacts.

Every run writes CSV files plus ``manifest.jsonl`` into the output directory.
The manifest holds the scenario echo, seed, library versions, wall time,
one record per artifact (with its sha256 and the formula it came from) and
one record per check.  The run status is 0 only if every check passed.
"""
from __future__ import annotations

import math
import platform
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy

from . import __version__, artifacts, cosmo
from . import geometry as geo
from . import nlse, qhd, sde, suites
from .errors import CFLError, CurvQHDError
from .scenario import Scenario, build_chart, echo
from .suites import Check, below


@dataclass
class RunResult:
    status: int
    out_dir: Path
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)

    @property
    def manifest(self) -> Path:
        return self.out_dir / "manifest.jsonl"


def versions() -> dict:
    return {"curvqhd": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


# ----------------------------------------------------------------------
# initial conditions


def _distance2(chart, center):
    X = chart.coords
    if chart.kind == "sphere2":
        c = list(center) + [0.0] * (2 - len(center))
        p = np.stack(X, axis=-1)
        return sde.geodesic_distance(chart, p, np.array(c)) ** 2
    if chart.kind == "circle":
        return sde.geodesic_distance(chart, X[0][..., None], np.array([center[0]])) ** 2
    c = list(center) + [0.0] * (chart.dim - len(center))
    return sum((x - ck) ** 2 for x, ck in zip(X, c))


def initial_condition(s: Scenario, chart):
    """Return ``(rho, theta)``: a probability density and a phase field."""
    ini = s.section("initial")
    kind = ini["kind"]
    X = chart.coords
    theta = np.zeros(chart.cells)
    if kind == "gaussian":
        rho = np.exp(-_distance2(chart, ini["center"]) / (2 * ini["sigma"] ** 2))
    elif kind == "exp-cos":
        rho = np.exp(ini["beta"] * np.cos(X[0]))
    elif kind == "uniform":
        rho = np.ones(chart.cells)
    else:  # plane-wave
        rho = np.ones(chart.cells)
        k = list(ini["k"]) + [0.0] * (chart.dim - len(ini["k"]))
        theta = sum(kk * x for kk, x in zip(k, X))
    return rho / geo.integrate(chart, rho), theta


def _velocity_from_phase(chart, theta, hbar, mass):
    w = np.exp(1j * theta)
    dtheta, _ = nlse.phase_gradient(chart, w)
    return (hbar / mass) * chart.g_inv * dtheta


# ----------------------------------------------------------------------
# run kinds


class _Run:
    def __init__(self, out: Path, scale: float = 1.0, s: Scenario = None):
        self.s, self.out, self.scale = s, out, scale
        self.checks, self.files, self.results = [], [], []

    def file(self, writer, name, *args, formula=""):
        path = writer(self.out / name, *args)
        self.files.append((path, formula))
        return path

    def table(self, name, header, rows, formula=""):
        return self.file(artifacts.write_csv, name, header, rows, formula=formula)


def _closed(chart):
    return all(t != "open" for ends in chart.topology for t in ends)


def run_qhd(r: _Run):
    s = r.s
    chart = build_chart(s)
    rho, theta = initial_condition(s, chart)
    hbar, mass = s["physics.hbar"], s["physics.mass"]
    eos = qhd.Eos(s["physics.eos"], s["physics.kappa"], s["physics.index"])
    state = qhd.FluidState(chart, mass * rho, _velocity_from_phase(chart, theta, hbar, mass), eos=eos,
                           hbar=hbar, mass=mass)
    dt, steps = s["numerics.dt"], s["numerics.steps"]
    every = s["numerics.every"] or steps
    m0 = state.total_mass
    rows = [[0.0, m0, 0.0]]
    r.file(artifacts.write_state, "state_000000.csv", state, formula="fluid_state")
    for n in range(1, steps + 1):
        try:
            state = qhd.step_fluid(state, None, dt, qc=s["numerics.qc"], cfl=s["numerics.cfl"])
        except CFLError as exc:
            r.checks.append(Check("CFL condition", dt, f"<= {exc.suggested_dt:g}", False))
            break
        rows.append([state.t, state.total_mass, state.total_mass / m0 - 1])
        if n % every == 0 or n == steps:
            r.file(artifacts.write_state, f"state_{n:06d}.csv", state, formula="fluid_state")
    r.table("mass_series.csv", ["t", "total_mass", "rel_drift"], rows, formula="integrate(sqrt_g rho)")
    if _closed(chart):
        drift = max(abs(x[2]) for x in rows)
        r.checks.append(below("mass conservation (relative drift)", drift, 1e-10 * max(1.0, steps / 1000), r.scale))
    if len(rows) > 1 and np.isfinite(state.rho).all():
        s1 = qhd.step_fluid(state, None, dt, qc=s["numerics.qc"], check_cfl=False)
        s2 = qhd.step_fluid(s1, None, dt, qc=s["numerics.qc"], check_cfl=False)
        res = qhd.momentum_balance_residual([state, s1, s2])
        r.table("momentum_residual.csv", ["t", "momentum_balance_residual"], [[s1.t, res]],
                formula="momentum_balance_residual")


def _gamma(s, chart):
    return None if geo.chart_gamma(chart) != 0 else s["physics.gamma"]


def run_nlse(r: _Run):
    s = r.s
    chart = build_chart(s)
    rho, theta = initial_condition(s, chart)
    w = nlse.wavefield_for_chart(chart, nlse.madelung_compose(chart, rho, theta), mass=s["physics.mass"],
                                 hbar=s["physics.hbar"], gamma=_gamma(s, chart))
    dt, steps = s["numerics.dt"], s["numerics.steps"]
    every = s["numerics.every"] or steps
    n0 = w.norm
    rows = [[0.0, n0, 0.0]]
    r.file(artifacts.write_wavefield, "wavefield_000000.csv", w, formula="wavefield")
    done = 0
    while done < steps:
        k = min(every, steps - done)
        w = nlse.evolve_nlse(w, dt, k)
        done += k
        rows.append([w.t, w.norm, w.norm / n0 - 1])
        r.file(artifacts.write_wavefield, f"wavefield_{done:06d}.csv", w, formula="wavefield")
    r.table("norm_series.csv", ["t", "norm", "rel_drift"], rows, formula="l2_norm(phi)")
    r.checks.append(below("norm conservation (relative drift)", max(abs(x[2]) for x in rows), 1e-10, r.scale))


def run_oracle(r: _Run):
    s = r.s
    chart = build_chart(s)
    rho, theta = initial_condition(s, chart)
    hbar, mass = s["physics.hbar"], s["physics.mass"]
    state = qhd.FluidState(chart, mass * rho, _velocity_from_phase(chart, theta, hbar, mass), hbar=hbar, mass=mass)
    w = nlse.wavefield_for_chart(chart, nlse.madelung_compose(chart, rho, theta), mass=mass, hbar=hbar,
                                 gamma=_gamma(s, chart))
    dt, steps = s["numerics.dt"], s["numerics.steps"]
    every = s["numerics.every"] or steps
    qrun, wrun = [state], [w]
    done = 0
    try:
        while done < steps:
            k = min(every, steps - done)
            for _ in range(k):
                state = qhd.step_fluid(state, None, dt, qc=s["numerics.qc"], cfl=s["numerics.cfl"])
            w = nlse.evolve_nlse(w, dt, k)
            done += k
            qrun.append(state)
            wrun.append(w)
    except CFLError as exc:
        r.checks.append(Check("CFL condition", dt, f"<= {exc.suggested_dt:g}", False))
        return
    rep = nlse.oracle_compare(qrun, wrun)
    r.table("discrepancy.csv", ["t", "density_rel_l2", "velocity_l2"],
            [[t, a, b] for t, a, b in zip(rep.times, rep.density, rep.velocity)], formula="oracle_compare")
    r.file(artifacts.write_state, "state_final.csv", state, formula="fluid_state")
    r.file(artifacts.write_wavefield, "wavefield_final.csv", w, formula="wavefield")
    r.checks.append(below("final density discrepancy", rep.density[-1], s["numerics.tolerance"], r.scale))


def run_representability(r: _Run):
    s = r.s
    chart = build_chart(s)
    rho, _ = initial_condition(s, chart)
    res, verdict = nlse.representability_check(chart, rho, nlse.REPRESENTABILITY_TOL * r.scale)
    r.table("representability.csv", ["chart", "residual", "representable"], [[chart.kind, res, verdict]],
            formula="representability_check")
    r.file(artifacts.write_density, "density.csv", chart, rho, formula="initial_condition")
    expect = s["representability.expect"]
    if expect != "any":
        r.checks.append(Check("representability verdict", res, f"verdict {expect}", verdict == (expect == "true")))


def run_cosmo(r: _Run):
    s = r.s
    units = cosmo.check_dimensions()
    r.checks.append(Check("dimension self-check", len(units), "formulas consistent", True))
    rows = cosmo.sweep(s["cosmo.masses"], s["cosmo.hubbles"], s["cosmo.omegas"])
    lam = s["cosmo.lambda_obs"]
    table, text = [], []
    for row in rows:
        row.ratio_to_lambda = row.lambda_qc_energy / lam
        table += suites.cosmo_rows(row)
    for m, h, om, q, v, unit, formula in table:
        r.results.append({"M_kg": m, "H0_per_s": h, "Omega_m": om, "quantity": q, "value": v, "unit": unit,
                          "formula": formula})
    r.table("cosmo_sweep.csv", suites.COSMO_HEADER, table, formula="cosmo.sweep")
    widths = [12, 12, 8, 18, 24, 8, 28]
    text.append("  ".join(h.ljust(w) for h, w in zip(suites.COSMO_HEADER, widths)).rstrip())
    for row in table:
        text.append("  ".join(artifacts.fmt(v).ljust(w) for v, w in zip(row, widths)).rstrip())
    path = r.out / "cosmo_sweep.txt"
    path.write_text("\n".join(text) + "\n")
    r.files.append((path, "cosmo.sweep"))
    worst = max(x.route_rel_diff for x in rows)
    r.checks.append(below("route agreement (relative)", worst, 1e-14, r.scale))
    r.checks.append(Check("Lambda_QC non-negative", min(x.lambda_qc_energy for x in rows), ">= 0",
                          all(x.lambda_qc_energy >= 0 for x in rows)))


def _sample_points(chart, count=24):
    """Deterministic interior grid nodes, at least two cells from any pole."""
    idx = [np.linspace(2, n - 3, min(n - 4, 6 if chart.dim == 2 else count)).round().astype(int)
           for n in chart.cells]
    grids = np.meshgrid(*[ax[i] for ax, i in zip(chart.axes, idx)], indexing="ij")
    return [g.ravel() for g in grids]


def run_geometry(r: _Run):
    chart = build_chart(r.s)
    X = _sample_points(chart)
    G = chart.christoffel_diag(X)
    Gfd = geo.christoffel_fd_arrays(chart, X)
    R = chart.ricci_mixed_arrays(X)
    Rfd = geo.ricci_fd_arrays(chart, X)
    gd = chart.metric_diag(X)
    rows = []
    d = chart.dim
    for p in range(X[0].size):
        coords = [x[p] for x in X]
        for i in range(d):
            for j in range(d):
                for k in range(d):
                    rows.append(coords + ["christoffel", f"{i + 1}{j + 1}{k + 1}", G[i, j, k, p], Gfd[i, j, k, p],
                                          abs(G[i, j, k, p] - Gfd[i, j, k, p])])
                rows.append(coords + ["ricci", f"{i + 1}{j + 1}", R[i, j, p], Rfd[i, j, p],
                                      abs(R[i, j, p] - Rfd[i, j, p])])
    header = [f"x{k + 1}" for k in range(d)] + ["quantity", "index", "analytic", "finite_difference", "abs_error"]
    r.table("geometry_check.csv", header, rows, formula="christoffel/ricci vs finite differences")
    err_g = max(x[-1] for x in rows if x[d] == "christoffel")
    err_r = max(x[-1] for x in rows if x[d] == "ricci")
    frames = np.zeros((X[0].size, d, d))
    for k in range(d):
        frames[:, k, k] = 1 / np.sqrt(gd[k])
    ortho = float(np.max(sde.frame_residual(chart, np.stack(X, axis=1), frames)))
    r.checks.append(below("Christoffel analytic vs finite difference", err_g, 1e-6, r.scale))
    r.checks.append(below("Ricci analytic vs finite difference", err_r, 1e-4, r.scale))
    r.checks.append(below("tetrad orthonormality", ortho, 1e-12, r.scale))


def run_sde(r: _Run):
    s = r.s
    chart = build_chart(s)
    lo, hi = chart.bounds[0]
    period = hi - lo
    ini = s.section("initial")
    if ini["kind"] not in ("gaussian", "uniform", "exp-cos"):
        raise CurvQHDError("sde-validate needs a positive initial density (gaussian, exp-cos or uniform)")
    x = chart.coords[0]
    if ini["kind"] == "gaussian":
        rho0 = suites.wrapped_gaussian(x, ini["center"][0], ini["sigma"], period)
    else:
        rho0, _ = initial_condition(s, chart)
    rho0 = rho0 / geo.integrate(chart, rho0)
    a = ini["flow"]
    wave = np.sin(2 * math.pi * (x - lo) / period)[None]

    def velocity(t):
        return a * wave / np.sqrt(chart.g)

    dt, steps, n = s["numerics.dt"], s["numerics.steps"], s["numerics.walkers"]
    diffusion = s["physics.hbar"] / s["physics.mass"]
    rng = np.random.default_rng([s["run.seed"], 1])
    ref = rho0
    if s["numerics.direction"] == "backward":
        ref = sde.solve_continuity(chart, rho0, velocity, abs(dt) / 2, 2 * steps)[-1][1]
    # piecewise-constant sampling of the starting law
    mass = ref * chart.sqrt_g * chart.cell_volume
    cells = rng.choice(chart.cells[0], size=n, p=mass / mass.sum())
    x0 = lo + (cells + rng.random(n)) * chart.spacing[0]
    out = suites.walker_pde_comparison(chart, s["numerics.bins"], rho0, velocity, x0, dt=abs(dt), steps=steps,
                                       seed=s["run.seed"], workers=s["run.workers"], diffusion=diffusion,
                                       direction=s["numerics.direction"])
    ens = out["ensemble"]
    r.file(artifacts.write_ensemble, "ensemble_final.csv", ens, formula="sde.step_ensemble")
    r.file(artifacts.write_density, "density_pde.csv", chart, out["rho_ref"], formula="solve_continuity")
    r.file(artifacts.write_density, "density_walkers.csv", out["bins"], out["estimate"].rho,
           formula="estimate_density")
    bc = out["bins"]
    r.table("bins.csv", ["x1", "p_pde", "p_walkers", "z", "consistency_residual", "residual_se"],
            zip(bc.axes[0], out["p"], out["estimate"].counts / out["estimate"].samples, out["z"], out["residual"],
                out["residual_se"]), formula="bin_probabilities/consistency_residual")
    r.checks.append(below("walker density, max |z| over bins", out["z"].max(), 3.0, r.scale))
    r.checks.append(below("consistency residual, max |z| over bins", out["z_residual"].max(), 3.0, r.scale))
    if s["numerics.renormalize"]:
        res = sde.frame_residual(chart, ens.positions, ens.frames)
        r.checks.append(below("frame orthonormality", res.max(), 1e-10, r.scale))


RUNNERS = {
    "qhd-run": run_qhd,
    "nlse-run": run_nlse,
    "oracle-compare": run_oracle,
    "representability": run_representability,
    "cosmo-sweep": run_cosmo,
    "geometry-check": run_geometry,
    "sde-validate": run_sde,
}


def run(s: Scenario) -> RunResult:
    """Execute ``s``; numerical failures become failing checks rather than tracebacks."""
    out = Path(s["run.out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    man = artifacts.Manifest(out / "manifest.jsonl")
    man.add("scenario", kind=s.kind, seed=s["run.seed"], echo=echo(s))
    man.add("provenance", versions=versions(), seed=s["run.seed"], workers=s["run.workers"])
    r = _Run(out, s["run.tolerance_scale"], s)
    t0 = time.perf_counter()
    try:
        RUNNERS[s.kind](r)
    except CurvQHDError as exc:
        r.checks.append(Check(f"run completed ({type(exc).__name__})", math.nan, str(exc), False))
    wall = time.perf_counter() - t0
    return _finish(man, r, wall)


def _finish(man, r, wall):
    for res in r.results:
        man.add("result", **res)
    for path, formula in r.files:
        man.add("artifact", path=Path(path).name, sha256=artifacts.sha256(path), formula=formula)
    for c in r.checks:
        man.add("check", name=c.name, value=c.value, bound=c.bound, passed=c.passed, unit=c.unit, formula=c.formula)
    status = 0 if all(c.passed for c in r.checks) else 1
    man.add("summary", wall_time_s=wall, checks=len(r.checks), failed=sum(not c.passed for c in r.checks),
            status=status)
    return RunResult(status, r.out, r.checks, [Path(p) for p, _ in r.files])


def run_suite(name: str, out_dir, *, seed=0, workers=1, tolerance_scale=1.0) -> RunResult:
    """Run a named suite (or ``acceptance`` for all of them, ``quick`` for the fast ones)."""
    names = list(suites.SUITES) if name == "acceptance" else list(suites.QUICK) if name == "quick" else [name]
    for n in names:
        if n not in suites.SUITES:
            raise CurvQHDError(f"unknown suite {n!r}; choose from {', '.join(list(suites.SUITES) + ['quick', 'acceptance'])}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    man = artifacts.Manifest(out / "manifest.jsonl")
    man.add("suite", name=name, members=names, seed=seed, tolerance_scale=tolerance_scale)
    man.add("provenance", versions=versions(), seed=seed, workers=workers)
    r = _Run(out, tolerance_scale)
    t0 = time.perf_counter()
    for n in names:
        rep = suites.SUITES[n](seed=seed, workers=workers, tolerance_scale=tolerance_scale)
        for fname, (header, rows) in rep.tables.items():
            r.table(f"{n}__{fname}", header, rows, formula=f"suite:{n}")
        for c in rep.checks:
            c.name = f"[{n}] {c.name}"
            r.checks.append(c)
    return _finish(man, r, time.perf_counter() - t0)
