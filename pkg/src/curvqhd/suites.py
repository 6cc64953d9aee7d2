"""Named validation suites.

Each suite runs a fixed numerical experiment and returns a
:class:`SuiteReport` of pass/fail checks plus the tables it produced.  The
command line (``curvqhd suite <name>``) and the acceptance tests both call
these functions, so the two can never drift apart.

``tolerance_scale`` multiplies every upper bound; window checks (such as a
convergence ratio of 4 +- 1) are left as they are.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import cosmo
from . import geometry as geo
from . import nlse, qhd, sde


@dataclass
class Check:
    name: str
    value: float
    bound: str  # human-readable bound, e.g. "< 1e-3" or "in [3, 5]"
    passed: bool
    unit: str = "1"
    formula: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.6g} {self.bound}"


def below(name, value, bound, scale=1.0, **kw) -> Check:
    b = bound * scale
    return Check(name, float(value), f"< {b:g}", bool(value < b), **kw)


def within(name, value, lo, hi, **kw) -> Check:
    return Check(name, float(value), f"in [{lo:g}, {hi:g}]", bool(lo <= value <= hi), **kw)


@dataclass
class SuiteReport:
    name: str
    checks: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # file name -> (header, rows)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


# ----------------------------------------------------------------------
# cosmology


def cosmo_reproduction(*, tolerance_scale=1.0, **_) -> SuiteReport:
    rep = SuiteReport("cosmo")
    units = cosmo.check_dimensions()
    rep.checks.append(Check("dimension self-check", len(units), "formulas consistent", True))
    base = cosmo.CosmologyParams()
    alphas = [cosmo.alpha(base.with_(H0=H)) for H in np.linspace(2.18e-18, 2.30e-18, 7)]
    rep.checks.append(within("alpha min over H0 range [1e-84]", min(alphas) / 1e-84, 0.5, 5, formula="alpha"))
    rep.checks.append(within("alpha max over H0 range [1e-84]", max(alphas) / 1e-84, 0.5, 5, formula="alpha"))
    row = cosmo.evaluate(base)
    rep.checks.append(within("log10(Lambda_QC / 1e-137 m^-2)", math.log10(row.lambda_qc_energy / 1e-137), -1, 1,
                             formula="lambda_qc_from_energy"))
    rep.checks.append(within("log10(Lambda_QC/Lambda / 1e-85)", math.log10(row.ratio_to_lambda / 1e-85), -1, 1,
                             formula="lambda_ratio"))
    rep.checks.append(below("route agreement (relative)", row.route_rel_diff, 1e-14, tolerance_scale))
    table = []
    for r in cosmo.sweep([cosmo.HYDROGEN_MASS, 2 * cosmo.HYDROGEN_MASS], [2.18e-18, 2.2e-18, 2.3e-18],
                         [0.1, 0.3]):
        table += cosmo_rows(r)
    rep.tables["cosmo_sweep.csv"] = (COSMO_HEADER, table)
    return rep


COSMO_HEADER = ["M_kg", "H0_per_s", "Omega_m", "quantity", "value", "unit", "formula"]


def cosmo_rows(r: cosmo.CosmoRow) -> list:
    key = [r.M, r.H0, r.Omega_m]
    items = [
        ("eps_plus_P", r.eps_plus_P, "J/m^3", "critical_energy_density"),
        ("alpha", r.alpha, "1", "alpha"),
        ("d0_rho_M", r.drho, "kg/m^4", "drho_dt_from_conservation"),
        ("Lambda_QC", r.lambda_qc_drho, "1/m^2", "lambda_qc_from_drho"),
        ("Lambda_QC", r.lambda_qc_energy, "1/m^2", "lambda_qc_from_energy"),
        ("pressure_shift", r.pressure_shift, "J/m^3", "pressure_shift"),
        ("Lambda_QC/Lambda", r.ratio_to_lambda, "1", "lambda_ratio"),
    ]
    return [key + list(it) for it in items]


# ----------------------------------------------------------------------
# hydrodynamics versus the Schroedinger oracle on the sphere


def sphere_density(chart, beta=0.5):
    rho = np.exp(beta * np.cos(chart.coords[0]))
    return rho / geo.integrate(chart, rho)


def _final_momentum_residual(state, dt, qc):
    s1 = qhd.step_fluid(state, None, dt, qc=qc)
    s2 = qhd.step_fluid(s1, None, dt, qc=qc)
    return qhd.momentum_balance_residual([state, s1, s2])


def oracle_equivalence(*, levels=((16, 32), (32, 64), (64, 128)), T=1.0, dt0=0.0036, gamma=None,
                       tolerance_scale=1.0, **_) -> SuiteReport:
    """Matched hydro and Schroedinger runs under simultaneous h and dt halving.

    Also records the momentum-balance residual of the final hydro state with
    and without the quantum-curvature force.
    """
    rep = SuiteReport("oracle")
    finals, mom_on, mom_off, rows = [], [], [], []
    for lev, (nt, nph) in enumerate(levels):
        chart = geo.Chart.sphere2(1.0, nt, nph)
        dt = dt0 / 2 ** lev
        steps = int(round(T / dt))
        qrun, wrun = nlse.run_oracle_pair(chart, sphere_density(chart), dt=dt, steps=steps,
                                          every=max(1, steps // 4), gamma=gamma)
        d = nlse.oracle_compare(qrun, wrun)
        for t, dr, dv in zip(d.times, d.density, d.velocity):
            rows.append([nt, nph, dt, t, dr, dv])
        finals.append(d.density[-1])
        mom_on.append(_final_momentum_residual(qrun[-1], dt, True))
        mom_off.append(_final_momentum_residual(qrun[-1], dt, False))
    rep.tables["oracle_discrepancy.csv"] = (["n_theta", "n_phi", "dt", "t", "density_rel_l2", "velocity_l2"], rows)
    rep.tables["momentum_residual.csv"] = (
        ["n_theta", "n_phi", "residual_qc_on", "residual_qc_off"],
        [[nt, nph, a, b] for (nt, nph), a, b in zip(levels, mom_on, mom_off)],
    )
    for k in range(1, len(levels)):
        rep.checks.append(within(f"density discrepancy ratio level {k - 1}/{k}", finals[k - 1] / finals[k], 3, 5))
    rep.checks.append(below("final density discrepancy (finest)", finals[-1], 1e-3, tolerance_scale))
    for k in range(1, len(levels)):
        rep.checks.append(within(f"momentum residual ratio, qc on, level {k - 1}/{k}", mom_on[k - 1] / mom_on[k], 3, 5))
    spread = max(mom_off) / min(mom_off)
    rep.checks.append(below("momentum residual, qc off: spread across levels", spread, 1.5, tolerance_scale))
    rep.checks.append(Check("momentum residual floor, qc off / qc on (finest)", mom_off[-1] / mom_on[-1], ">= 10",
                            bool(mom_off[-1] >= 10 * mom_on[-1])))
    return rep


# ----------------------------------------------------------------------
# free Gaussian packet in flat space


def flat_gaussian(*, cells=256, half_width=8.0, sigma0=1.0, hbar=1.0, mass=1.0, tolerance_scale=1.0,
                  samples=16, **_) -> SuiteReport:
    rep = SuiteReport("flat-gaussian")
    chart = geo.Chart.flat_line(-half_width, half_width, cells, topology="open")
    x = chart.coords[0]
    rho = mass * np.exp(-x ** 2 / (2 * sigma0 ** 2)) / math.sqrt(2 * math.pi * sigma0 ** 2)
    state = qhd.FluidState(chart, rho, np.zeros((1, cells)), hbar=hbar, mass=mass)
    T = 2 * mass * sigma0 ** 2 / hbar
    steps = int(math.ceil(T / (0.9 * qhd.stable_dt(state))))
    steps = samples * int(math.ceil(steps / samples))
    dt = T / steps
    rows, worst = [], 0.0
    for n in range(1, steps + 1):
        state = qhd.step_fluid(state, None, dt)
        if n % (steps // samples) == 0:
            m = geo.integrate(chart, state.rho)
            mean = geo.integrate(chart, x * state.rho) / m
            var = geo.integrate(chart, (x - mean) ** 2 * state.rho) / m
            exact = sigma0 ** 2 + (hbar * state.t / (2 * mass * sigma0)) ** 2
            worst = max(worst, abs(var / exact - 1))
            rows.append([state.t, var, exact, var / exact - 1])
    rep.tables["gaussian_width.csv"] = (["t", "sigma_sq", "sigma_sq_exact", "rel_error"], rows)
    rep.checks.append(below("max relative width error", worst, 5e-3, tolerance_scale))
    return rep


# ----------------------------------------------------------------------
# stochastic walkers versus the continuity equation


def wrapped_gaussian(x, center, sigma, period=2 * math.pi):
    return sum(np.exp(-(x - center + period * k) ** 2 / (2 * sigma ** 2)) for k in range(-4, 5))


def walker_pde_comparison(chart, bins, rho0, velocity, x0, *, dt, steps, seed=0, workers=1, diffusion=1.0,
                          direction="forward"):
    """Run walkers against the continuity PDE on a periodic 1-D chart.

    The PDE is solved forward from ``rho0`` at half the walker step.  A
    forward ensemble starts from ``x0`` at time 0 with ``u_+`` and is compared
    with the PDE density at the end; a backward ensemble starts from ``x0``
    at the final time with ``u_-`` and is compared with ``rho0``.  Bin errors
    use the multinomial standard error; the consistency residual uses the
    delta-method standard error of the central difference of ``ln p``.
    """
    sol = sde.solve_continuity(chart, rho0, velocity, dt / 2, 2 * steps)
    times = np.array([t for t, _ in sol])
    pairs = [sde.drifts_from_hydro(r, velocity(t), chart, diffusion) for t, r in sol]
    x0 = np.asarray(x0, dtype=float).reshape(-1, 1)
    n = x0.shape[0]
    if direction == "forward":
        ens = sde.make_ensemble(chart, x0, diffusion=diffusion, seed=seed)
        ens = sde.advance(ens, sde.DriftSeries(times, [p[0] for p in pairs]), dt, steps, workers=workers)
        rho_ref, t_ref = sol[-1][1], times[-1]
    else:
        ens = sde.make_ensemble(chart, x0, diffusion=diffusion, seed=seed, t=times[-1], direction="backward")
        ens = sde.advance(ens, sde.DriftSeries(times, [p[1] for p in pairs]), -dt, steps, workers=workers)
        rho_ref, t_ref = rho0, 0.0
    bc = chart.with_cells(bins)
    p = sde.bin_probabilities(chart, rho_ref, bins)
    est = sde.estimate_density(ens, bc)
    z = np.abs(est.counts / est.samples - p) / np.sqrt(p * (1 - p) / est.samples)
    rho_bins = p / (bc.sqrt_g * bc.cell_volume)
    v_bins = velocity(t_ref).reshape(1, bins, -1).mean(axis=2)
    up, um = sde.drifts_from_hydro(rho_bins, v_bins, bc, diffusion)
    res = sde.consistency_residual(est.rho, up, um, bc, diffusion)[0]
    var = (1 - p) / (n * p)
    # the residual is contravariant: D g^{11} times a central difference of ln p
    se = diffusion * bc.g_inv[0] * np.sqrt(np.roll(var, -1) + np.roll(var, 1) + 2 / n) / (2 * bc.spacing[0])
    return {"ensemble": ens, "bins": bc, "p": p, "estimate": est, "z": z, "residual": res, "residual_se": se,
            "z_residual": np.abs(res) / se, "solution": sol, "rho_ref": rho_ref}


def sde_pde_consistency(*, seed=0, workers=1, walkers=100_000, dt=1e-3, T=0.5, bins=64, fine=512,
                        sigma=1.2, amplitude=0.3, diffusion=1.0, backward=True, tolerance_scale=1.0,
                        **_) -> SuiteReport:
    """Walkers on circle(1) from a wrapped Gaussian, driven by ``u_+`` of the flow ``v = a sin x``.

    With ``backward`` the final ensemble is also run back with ``u_-`` and
    compared with the initial law (reported, not part of the pass criterion).
    """
    rep = SuiteReport("sde")
    fc = geo.Chart.circle(1.0, fine)
    rho0 = wrapped_gaussian(fc.coords[0], math.pi, sigma)
    rho0 /= geo.integrate(fc, rho0)

    def velocity(t):
        return amplitude * np.sin(fc.coords[0])[None]

    rng = np.random.default_rng([seed, 1])
    x0 = np.mod(rng.normal(math.pi, sigma, walkers), 2 * math.pi)
    steps = int(round(T / dt))
    fw = walker_pde_comparison(fc, bins, rho0, velocity, x0, dt=dt, steps=steps, seed=seed, workers=workers,
                               diffusion=diffusion)
    rep.checks.append(below("forward density, max |z| over bins", fw["z"].max(), 3.0, tolerance_scale))
    rep.checks.append(below("consistency residual, max |z| over bins", fw["z_residual"].max(), 3.0,
                            tolerance_scale))
    header = ["x1", "p_pde", "p_walkers", "z", "consistency_residual", "residual_se"]
    rows = [list(r) for r in zip(fw["bins"].axes[0], fw["p"], fw["estimate"].counts / walkers, fw["z"],
                                 fw["residual"], fw["residual_se"])]
    if backward:
        ens = fw["ensemble"]
        bk = walker_pde_comparison(fc, bins, rho0, velocity, ens.positions[ens.active], dt=dt, steps=steps,
                                   seed=seed + 1, workers=workers, diffusion=diffusion, direction="backward")
        header += ["p_backward", "z_backward"]
        m = bk["estimate"].samples
        rows = [r + [c / m, zz] for r, c, zz in zip(rows, bk["estimate"].counts, bk["z"])]
    rep.tables["sde_bins.csv"] = (header, rows)
    return rep


# ----------------------------------------------------------------------
# frame transport


def holonomy_angle(chart, theta0, n):
    """Angle of a frame vector after transport once around the latitude ``theta0``."""
    w = sde.Walker(np.array([theta0, 0.0]), geo.tetrad_at(chart, (theta0, 0.0)).frame)
    dphi = np.array([0.0, 2 * math.pi / n])
    for _ in range(n):
        w = sde.transport_tetrad(w, dphi, chart)
    e = w.frame[:, 0]
    return math.atan2(e[1] * chart.radius * math.sin(theta0), e[0] * chart.radius)


def transport_fidelity(*, seed=0, workers=1, walkers=200, steps=10_000, dt=1e-3,
                       growth_dts=(4e-3, 2e-3, 1e-3, 5e-4), growth_T=0.2, growth_walkers=2000,
                       tolerance_scale=1.0, **_) -> SuiteReport:
    rep = SuiteReport("transport")
    chart = geo.Chart.sphere2(1.0, 32, 64)
    th0 = math.pi / 3
    rows = []
    for n in (16, 64, 256, 1024):
        ang = abs(holonomy_angle(chart, th0, n))
        rows.append([n, ang, abs(ang - math.pi) / math.pi])
    rep.tables["holonomy.csv"] = (["steps", "angle", "rel_error_vs_pi"], rows)
    rep.checks.append(below("holonomy relative error vs pi (1024 steps)", rows[-1][2], 1e-2, tolerance_scale))

    def zero(x, t):
        return np.zeros_like(x)

    start = np.tile([math.pi / 2, 1.0], (walkers, 1))
    ens = sde.make_ensemble(chart, start, seed=seed)
    ens = sde.advance(ens, zero, dt, steps, renormalize=True, workers=workers)
    r = sde.frame_residual(chart, ens.positions, ens.frames)[ens.active]
    rep.checks.append(below(f"frame residual after {steps} steps, renormalized", r.max(), 1e-10, tolerance_scale))

    med = []
    start = np.tile([math.pi / 2, 1.0], (growth_walkers, 1))
    for h in growth_dts:
        e = sde.make_ensemble(chart, start, seed=seed)
        e = sde.advance(e, zero, h, int(round(growth_T / h)), renormalize=False, workers=workers)
        med.append(float(np.median(sde.frame_residual(chart, e.positions, e.frames)[e.active])))
    slope = np.polyfit(np.log(growth_dts), np.log(med), 1)[0]
    rep.tables["frame_residual_growth.csv"] = (["dt", "median_residual"], [list(a) for a in zip(growth_dts, med)])
    rep.checks.append(within("frame residual without renormalization: order in dt", slope, 0.8, 1.2))
    return rep


# ----------------------------------------------------------------------
# Gausson


def gausson_stationarity(*, gamma=2.0, half_width=5.0, cells=512, per_period=800, periods=10, samples_per_period=8,
                         tolerance_scale=1.0, **_) -> SuiteReport:
    """Gaussian stationary state of the logarithmic equation with ``hbar = m = 1``.

    ``|phi|^2 = A^2 exp(-x^2/(2 s^2))`` with ``s^2 = 1/(2 gamma)`` rotates at
    ``mu = (1/2)(1/(2 s^2) - gamma ln A^2)``; one internal period is ``2 pi/|mu|``.
    """
    rep = SuiteReport("gausson")
    s2 = 1 / (2 * gamma)
    A2 = 1 / math.sqrt(2 * math.pi * s2)
    mu = 0.5 * (1 / (2 * s2) - gamma * math.log(A2))
    period = 2 * math.pi / abs(mu)
    chart = geo.Chart.flat_line(-half_width, half_width, cells)
    x = chart.coords[0]
    w = nlse.wavefield_for_chart(chart, math.sqrt(A2) * np.exp(-x ** 2 / (4 * s2)), gamma=gamma)
    r0 = w.density
    dt = period / per_period
    chunk = per_period // samples_per_period
    rows, worst = [], 0.0
    for _ in range(periods * samples_per_period):
        w = nlse.evolve_nlse(w, dt, chunk)
        drift = geo.l2_norm(chart, w.density - r0) / geo.l2_norm(chart, r0)
        worst = max(worst, drift)
        rows.append([w.t, drift, w.norm])
    rep.tables["gausson_drift.csv"] = (["t", "density_rel_drift", "norm"], rows)
    rep.checks.append(below(f"Gausson density drift over {periods} periods", worst, 1e-3, tolerance_scale))
    return rep


# ----------------------------------------------------------------------
# representability


def bump_density(chart, center=(0.3, 0.0), sigma=0.6):
    X = chart.coords
    return np.exp(-((X[0] - center[0]) ** 2 + (X[1] - center[1]) ** 2) / (2 * sigma ** 2))


def representability_verdicts(*, cells=(32, 64, 128), tolerance_scale=1.0, **_) -> SuiteReport:
    rep = SuiteReport("representability")
    rows = []
    for n in cells:
        fl = geo.Chart.flat_line(-5, 5, 4 * n)
        sp = geo.Chart.sphere2(1.0, n, 2 * n)
        hy = geo.Chart.hyperbolic2(1.0, 2.0, n, 2 * n)
        bu = geo.Chart.bump2(0.5, 0.5, 3.0, n)
        cases = [
            ("flat-line", fl, np.exp(-fl.coords[0] ** 2)),
            ("sphere2", sp, np.exp(0.5 * np.cos(sp.coords[0]) + 0.3 * np.sin(sp.coords[0]) * np.cos(sp.coords[1]))),
            ("hyperbolic2", hy, np.exp(-hy.coords[0] ** 2 + 0.3 * np.sinh(hy.coords[0]) * np.cos(hy.coords[1]))),
            ("bump2", bu, bump_density(bu)),
        ]
        for name, chart, rho in cases:
            res, verdict = nlse.representability_check(chart, rho, nlse.REPRESENTABILITY_TOL * tolerance_scale)
            rows.append([name, n, res, verdict])
    rep.tables["representability.csv"] = (["chart", "cells", "residual", "representable"], rows)
    for name in ("flat-line", "sphere2", "hyperbolic2"):
        ok = all(r[3] for r in rows if r[0] == name)
        worst = max(r[2] for r in rows if r[0] == name)
        rep.checks.append(Check(f"{name} representable", worst, "verdict true on every grid", ok))
    bump = [r[2] for r in rows if r[0] == "bump2"]
    rep.checks.append(Check("bump2 not representable", min(bump), "verdict false on every grid",
                            not any(r[3] for r in rows if r[0] == "bump2")))
    rep.checks.append(within("bump2 residual, finest/coarsest", bump[-1] / bump[0], 0.5, 2.0))
    return rep


SUITES = {
    "cosmo": cosmo_reproduction,
    "oracle": oracle_equivalence,
    "flat-gaussian": flat_gaussian,
    "sde": sde_pde_consistency,
    "transport": transport_fidelity,
    "gausson": gausson_stationarity,
    "representability": representability_verdicts,
}
QUICK = ("cosmo", "flat-gaussian", "gausson", "representability")
