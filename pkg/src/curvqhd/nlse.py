"""Logarithmic nonlinear Schroedinger oracle for constant-curvature charts.

When ``R_j^k`` is a constant multiple of the identity the hydrodynamic
equations admit a velocity potential and are equivalent to

    i hbar d_t phi = [-(hbar^2/2m) Delta_LB + V - (hbar^2/2m) gamma ln|phi|^2] phi

with ``gamma = R/2`` (sphere-positive ``R``).  This module evolves that
equation, converts between wave fields and hydrodynamic fields, and tests
whether a given chart/density pair admits the rewrite at all.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import geometry as geo
from .errors import ConfigurationError, RepresentabilityError
from .qhd import DENSITY_FLOOR, FluidState, log_density

REPRESENTABILITY_TOL = 1e-6  # artifact convention, relative to the field magnitude


@dataclass(frozen=True, eq=False)
class WaveField:
    chart: geo.Chart
    phi: np.ndarray
    t: float = 0.0
    mass: float = 1.0
    gamma: float = 0.0
    hbar: float = 1.0
    V: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.phi.shape != self.chart.cells:
            raise ConfigurationError("wave field shape does not match the chart grid")

    @property
    def density(self) -> np.ndarray:
        return np.abs(self.phi) ** 2

    @property
    def norm(self) -> float:
        return geo.l2_norm(self.chart, self.phi)


def wavefield_for_chart(chart, phi, *, mass=1.0, hbar=1.0, V=None, gamma=None, t=0.0) -> WaveField:
    """Build a wave field, taking ``gamma`` from the chart's Ricci tensor.

    A ``gamma`` passed explicitly on a curved chart must match the curvature;
    on flat charts any value is allowed.
    """
    if not chart.has_constant_ricci:
        raise RepresentabilityError(
            f"{chart.kind} has position-dependent Ricci curvature; no Schroedinger form exists"
        )
    chart_gamma = geo.chart_gamma(chart)
    if gamma is None:
        gamma = chart_gamma
    elif chart_gamma != 0 and not np.isclose(gamma, chart_gamma, rtol=1e-12, atol=0):
        raise ConfigurationError(f"gamma={gamma} disagrees with the chart curvature (gamma={chart_gamma})")
    return WaveField(chart, np.asarray(phi, dtype=complex), t, mass, gamma, hbar, V)


@lru_cache(maxsize=16)
def _crank_nicolson(chart, dt, mass, hbar):
    L = geo.laplace_beltrami_matrix(chart)
    N = L.shape[0]
    a = 1j * dt * hbar / (4 * mass)  # i dt/(2 hbar) * hbar^2/(2m)
    I = sp.identity(N, format="csc", dtype=complex)
    lhs = (I - a * L).tocsc()
    rhs = (I + a * L).tocsr()
    return spla.splu(lhs), rhs


def _potential_phase(w: WaveField, phi, dt):
    rho = np.abs(phi) ** 2
    cut = DENSITY_FLOOR * rho.max()
    U = -(w.hbar ** 2 / (2 * w.mass)) * w.gamma * np.log(np.maximum(rho, cut))
    if w.V is not None:
        U = U + w.V
    return phi * np.exp(-1j * dt * U / w.hbar)


def evolve_nlse(w: WaveField, dt: float, steps: int = 1) -> WaveField:
    """Strang splitting: exact phase rotation for ``V`` and the log term, Crank-Nicolson for the kinetic part."""
    if not w.chart.has_constant_ricci:
        raise RepresentabilityError(f"{w.chart.kind} has no constant Ricci tensor")
    lu, rhs = _crank_nicolson(w.chart, float(dt), float(w.mass), float(w.hbar))
    phi = w.phi
    shape = phi.shape
    for _ in range(steps):
        phi = _potential_phase(w, phi, 0.5 * dt)
        phi = lu.solve(rhs @ phi.ravel()).reshape(shape)
        phi = _potential_phase(w, phi, 0.5 * dt)
    return replace(w, phi=phi, t=w.t + steps * dt)


def phase_gradient(chart, phi, floor=DENSITY_FLOOR):
    """Covariant ``d_j theta`` from local phase differences; returns ``(dtheta, mask)``.

    Differences are taken as ``angle(phi[j+1] conj(phi[j-1]))``, i.e. unwrapped
    along each grid line.  Nodes whose neighbours are below the density floor
    or whose two-cell phase step exceeds pi/2 are flagged in ``mask``.
    """
    d = chart.dim
    rho = np.abs(phi) ** 2
    small = rho < floor * rho.max()
    fp = geo.pad(chart, phi)
    out = np.empty((d,) + phi.shape)
    mask = small.copy()
    for k in range(d):
        ahead = geo._shift(fp, k, 1, d)
        behind = geo._shift(fp, k, -1, d)
        step = np.angle(ahead * np.conj(behind))
        out[k] = step / (2 * chart.spacing[k])
        mask |= np.abs(step) > 0.5 * np.pi
        mask |= geo._shift(geo.pad(chart, small.astype(float)), k, 1, d) > 0
        mask |= geo._shift(geo.pad(chart, small.astype(float)), k, -1, d) > 0
    return out, mask


def unwrapped_phase(chart, phi) -> np.ndarray:
    """Phase unwrapped line by line from node 0 (first axis 0 along the first column, then axis 1)."""
    theta = np.angle(phi)
    if chart.dim == 1:
        return np.unwrap(theta)
    first = np.unwrap(theta[:, 0])
    rows = np.unwrap(theta, axis=1)
    return rows - rows[:, :1] + first[:, None]


def madelung_decompose(w: WaveField, chart=None):
    """Return ``(rho, v, mask)`` with ``v^i = (hbar/m) g^{ij} d_j arg(phi)``."""
    chart = w.chart if chart is None else chart
    dtheta, mask = phase_gradient(chart, w.phi)
    v = (w.hbar / w.mass) * chart.g_inv * dtheta
    return w.density, v, mask


def madelung_compose(chart, rho, theta) -> np.ndarray:
    return np.sqrt(rho) * np.exp(1j * theta)


def representability_check(chart, rho, tol=REPRESENTABILITY_TOL):
    """Compare ``g^{ij} R_j^k d_k ln rho`` with ``g^{ij} nabla_k (R_j^k ln rho)``.

    Returns ``(residual, verdict)``: the L2 norm of the difference and whether
    it falls below ``tol`` times the larger of the two sides' norms.  Passing
    is necessary for the hydrodynamics to take Schroedinger form.
    """
    d = chart.dim
    f, _ = log_density(chart, rho)
    R = chart.ricci_grid
    df = geo.gradient(chart, f)
    lhs = chart.g_inv * np.einsum("jk...,k...->j...", R, df)
    # nabla_k S_j^k for the mixed tensor S_j^k = R_j^k ln rho
    S = R * f
    G = chart.christoffel_grid
    div = np.zeros((d,) + chart.cells)
    for j in range(d):
        for k in range(d):
            par = geo.component_parity(chart, (j, k))
            div[j] += geo.partial(chart, S[j, k], k, par)
        div[j] += np.einsum("kkl...,l...->...", G, S[j])
        div[j] -= np.einsum("lk...,lk...->...", G[:, :, j], S)
    rhs = chart.g_inv * div
    residual = geo.vector_l2_norm(chart, lhs - rhs)
    scale = max(geo.vector_l2_norm(chart, lhs), geo.vector_l2_norm(chart, rhs))
    verdict = residual <= tol * scale if scale > 0 else True
    return residual, bool(verdict)


# ----------------------------------------------------------------------
# cross-validation against the hydrodynamic solver


@dataclass
class DiscrepancyReport:
    times: np.ndarray
    density: np.ndarray  # relative L2(sqrt g) density difference
    velocity: np.ndarray  # L2 velocity difference (masked nodes excluded)

    def rows(self):
        for t, dr, dv in zip(self.times, self.density, self.velocity):
            yield {"t": float(t), "density_rel_l2": float(dr), "velocity_l2": float(dv)}


def oracle_compare(qhd_run, nlse_run) -> DiscrepancyReport:
    """Discrepancy time series between matched hydro states and wave fields."""
    if len(qhd_run) != len(nlse_run):
        raise ConfigurationError("runs must be sampled at the same times")
    times, dens, vel = [], [], []
    for s, w in zip(qhd_run, nlse_run):
        if s.chart is not w.chart and (s.chart.kind != w.chart.kind or s.chart.cells != w.chart.cells):
            raise ConfigurationError("hydro and wave runs use different charts")
        if not np.isclose(s.t, w.t, rtol=1e-9, atol=1e-12):
            raise ConfigurationError(f"sample times differ: {s.t} vs {w.t}")
        if s.hbar != w.hbar or s.mass != w.mass:
            raise ConfigurationError("hbar and mass must match between runs")
        chart = s.chart
        rho_w, v_w, mask = madelung_decompose(w)
        rho_s = s.rho / s.mass
        dens.append(geo.l2_norm(chart, rho_s - rho_w) / geo.l2_norm(chart, rho_w))
        dv = np.where(mask, 0.0, s.v - v_w)
        vel.append(geo.vector_l2_norm(chart, dv))
        times.append(s.t)
    return DiscrepancyReport(np.array(times), np.array(dens), np.array(vel))


def run_oracle_pair(chart, rho0, *, hbar=1.0, mass=1.0, V=None, dt, steps, every=1, qc=True, gamma=None):
    """Evolve matched hydro and wave runs from a state at rest; returns ``(qhd_run, nlse_run)``.

    ``rho0`` is a probability density; the hydro state carries ``mass * rho0``.
    """
    from .qhd import step_fluid

    state = FluidState(chart, mass * rho0, np.zeros((chart.dim,) + chart.cells), hbar=hbar, mass=mass)
    wave = wavefield_for_chart(chart, np.sqrt(rho0), mass=mass, hbar=hbar, V=V, gamma=gamma)
    qrun, wrun = [state], [wave]
    for n in range(1, steps + 1):
        state = step_fluid(state, V, dt, qc=qc)
        if n % every == 0 or n == steps:
            qrun.append(state)
    for n in range(every, steps + 1, every):
        wave = evolve_nlse(wave, dt, every)
        wrun.append(wave)
    if steps % every:
        wave = evolve_nlse(wave, dt, steps % every)
        wrun.append(wave)
    return qrun, wrun
