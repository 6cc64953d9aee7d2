"""Curved-space quantum hydrodynamics.

The state is the mass density ``rho`` and the contravariant velocity ``v``.
Both are advanced primitively with a three-stage strong-stability-preserving
Runge-Kutta scheme.  Momentum conservation is not built into the update; it
is checked afterwards with :func:`momentum_balance_residual`.

The quantum-curvature (QC) force is ``+(hbar^2/4M^2) g^{ij} R_j^k d_k ln rho``
with ``R_j^k`` the sphere-positive Ricci tensor of :mod:`curvqhd.geometry`.
This is the sign for which the stress tensor returned by
:func:`stress_tensor` is conserved.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import geometry as geo
from .errors import CFLError, ConfigurationError, PositivityError

DENSITY_FLOOR = 1e-30  # relative to the peak density


@dataclass(frozen=True)
class Eos:
    """Barotropic equation of state ``eps(rho) = kappa rho**index``."""

    kind: str = "dust"
    kappa: float = 0.0
    index: float = 2.0

    def __post_init__(self):
        if self.kind not in ("dust", "polytrope"):
            raise ConfigurationError(f"unknown equation of state {self.kind!r}")

    def energy(self, rho):
        if self.kind == "dust":
            return np.zeros_like(rho)
        return self.kappa * rho ** self.index

    def pressure(self, rho):
        # rho * d(eps)/d(rho) - eps
        if self.kind == "dust":
            return np.zeros_like(rho)
        return self.kappa * (self.index - 1.0) * rho ** self.index

    def sound_speed(self, rho):
        if self.kind == "dust":
            return np.zeros_like(rho)
        return np.sqrt(np.maximum(self.kappa * self.index * (self.index - 1.0) * rho ** (self.index - 1.0), 0.0))


DUST = Eos()


@dataclass(frozen=True, eq=False)
class FluidState:
    chart: geo.Chart
    rho: np.ndarray
    v: np.ndarray  # shape (d, *cells)
    t: float = 0.0
    eos: Eos = DUST
    hbar: float = 1.0
    mass: float = 1.0

    def __post_init__(self):
        if self.rho.shape != self.chart.cells or self.v.shape != (self.chart.dim,) + self.chart.cells:
            raise ConfigurationError("density/velocity shapes do not match the chart grid")

    @property
    def total_mass(self) -> float:
        return geo.integrate(self.chart, self.rho)

    @property
    def momentum_density(self) -> np.ndarray:
        return self.rho * self.v


@dataclass(frozen=True, eq=False)
class StressTensor:
    """``T^{ij}`` split into kinetic, pressure and quantum parts."""

    kinetic: np.ndarray
    pressure: np.ndarray
    quantum: np.ndarray
    total: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total", self.kinetic + self.pressure + self.quantum)


def log_density(chart, rho, floor=DENSITY_FLOOR):
    """``ln rho`` with a floor relative to the peak; returns ``(ln_rho, masked)``."""
    rho = np.asarray(rho, dtype=float)
    if np.any(~np.isfinite(rho)) or np.any(rho <= 0):
        raise PositivityError("density must be positive and finite")
    cut = floor * rho.max()
    masked = rho < cut
    return np.log(np.maximum(rho, cut)), masked


def quantum_potential(chart, rho) -> np.ndarray:
    """``(1/sqrt rho) Delta_LB sqrt rho``, evaluated as ``Delta ln rho / 2 + |grad ln rho|^2 / 4``."""
    f, _ = log_density(chart, rho)
    df = geo.gradient(chart, f)
    return 0.5 * geo.laplace_beltrami(chart, f) + 0.25 * np.sum(chart.g_inv * df ** 2, axis=0)


def quantum_force(rho, chart, hbar=1.0, mass=1.0) -> np.ndarray:
    """Force per unit mass from the quantum potential, contravariant components."""
    _, masked = log_density(chart, rho)
    Q = quantum_potential(chart, rho)
    F = (hbar ** 2 / (2 * mass ** 2)) * chart.g_inv * geo.gradient(chart, Q)
    F[:, masked] = 0.0
    return F


def qc_force(rho, chart, hbar=1.0, mass=1.0) -> np.ndarray:
    """Quantum-curvature force per unit mass, contravariant components."""
    f, masked = log_density(chart, rho)
    R = chart.ricci_grid
    if not np.any(R):
        return np.zeros((chart.dim,) + chart.cells)
    df = geo.gradient(chart, f)
    F = (hbar ** 2 / (4 * mass ** 2)) * chart.g_inv * np.einsum("jk...,k...->j...", R, df)
    F[:, masked] = 0.0
    return F


def _advection(chart, v):
    """``v^j nabla_j v^i``."""
    d = chart.dim
    out = np.einsum("ijk...,j...,k...->i...", chart.christoffel_grid, v, v)
    for i in range(d):
        par = geo.component_parity(chart, (i,))
        for j in range(d):
            out[i] += v[j] * geo.partial(chart, v[i], j, par)
    return out


def acceleration(state: FluidState, V=None, qc=True) -> np.ndarray:
    """Right-hand side of the velocity equation."""
    chart, rho = state.chart, state.rho
    a = -_advection(chart, state.v)
    if V is not None:
        a -= chart.g_inv * geo.gradient(chart, V) / state.mass
    if state.eos.kind != "dust":
        a -= chart.g_inv * geo.gradient(chart, state.eos.pressure(rho)) / rho
    if state.hbar != 0:
        a += quantum_force(rho, chart, state.hbar, state.mass)
        if qc:
            a += qc_force(rho, chart, state.hbar, state.mass)
    return a


def _rhs(state, V, qc, source):
    drho = -geo.divergence(state.chart, state.rho * state.v)
    dv = acceleration(state, V, qc)
    if source is not None:
        s_rho, s_v = source(state.t)
        drho = drho + s_rho
        dv = dv + s_v
    return drho, dv


def active_axes(state: FluidState) -> list:
    """Axes along which the state is not exactly uniform (or carries velocity)."""
    out = []
    for k in range(state.chart.dim):
        if state.chart.dim == 1:
            return [0]
        varies = np.ptp(state.rho, axis=k).max() > 0 or np.ptp(state.v, axis=k + 1).max() > 0
        if varies or np.any(state.v[k] != 0):
            out.append(k)
    return out


def stable_dt(state: FluidState, cfl=0.4) -> float:
    """Largest admissible step: ``cfl * h / max(|v|, c_s, hbar/(M h))`` over active axes."""
    axes = active_axes(state)
    if not axes:
        return np.inf
    h = state.chart.min_physical_spacing[axes]
    h_eff = 1.0 / np.sqrt(np.sum(1.0 / h ** 2))
    speed = np.sqrt(np.max(np.sum(state.chart.g * state.v ** 2, axis=0)))
    speed = max(speed, float(np.max(state.eos.sound_speed(state.rho))))
    speed = max(speed, abs(state.hbar) / (state.mass * h_eff))
    if speed == 0:
        return np.inf
    return cfl * h_eff / speed


def step_fluid(state: FluidState, V=None, dt=1e-3, *, qc=True, cfl=0.4, source: Optional[Callable] = None,
               check_cfl=True) -> FluidState:
    """One SSP-RK3 step of continuity plus the optimized momentum equation.

    ``source(t)`` may return extra ``(d rho/dt, d v/dt)`` terms, used by
    manufactured-solution tests.
    """
    if check_cfl:
        limit = stable_dt(state, cfl)
        if abs(dt) > limit:
            raise CFLError(f"dt={dt:g} exceeds stability bound {limit:g}", suggested_dt=limit)

    def stage(s, k_rho, k_v, h):
        return replace(s, rho=s.rho + h * k_rho, v=s.v + h * k_v, t=s.t + h)

    r1, v1 = _rhs(state, V, qc, source)
    s1 = stage(state, r1, v1, dt)
    _positive(s1)
    r2, v2 = _rhs(s1, V, qc, source)
    s2 = stage(s1, r2, v2, dt)
    s2 = replace(s2, rho=0.75 * state.rho + 0.25 * s2.rho, v=0.75 * state.v + 0.25 * s2.v, t=state.t + 0.5 * dt)
    _positive(s2)
    r3, v3 = _rhs(s2, V, qc, source)
    s3 = stage(s2, r3, v3, dt)
    out = replace(state, rho=state.rho / 3 + 2 * s3.rho / 3, v=state.v / 3 + 2 * s3.v / 3, t=state.t + dt)
    _positive(out)
    return out


def _positive(s):
    if not np.all(s.rho > 0) or not np.all(np.isfinite(s.v)):
        raise PositivityError(f"density lost positivity at t={s.t:g}")


def evolve(state: FluidState, dt, steps, V=None, *, qc=True, every=1, **kw) -> list:
    """Run ``steps`` steps, recording every ``every``-th state (first and last always)."""
    out = [state]
    for n in range(1, steps + 1):
        state = step_fluid(state, V, dt, qc=qc, **kw)
        if n % every == 0 or n == steps:
            out.append(state)
    return out


def stress_tensor(state: FluidState) -> StressTensor:
    """``rho v^i v^j + g^{ij} P - (hbar^2/4M^2) rho nabla^i nabla^j ln rho``."""
    chart, rho = state.chart, state.rho
    d = chart.dim
    f, _ = log_density(chart, rho)
    kin = rho * np.einsum("i...,j...->ij...", state.v, state.v)
    P = state.eos.pressure(rho)
    pres = np.zeros_like(kin)
    for i in range(d):
        pres[i, i] = chart.g_inv[i] * P
    H = geo.hessian(chart, f)
    quant = -(state.hbar ** 2 / (4 * state.mass ** 2)) * rho * np.einsum("i...,j...,ij...->ij...",
                                                                        chart.g_inv, chart.g_inv, H)
    return StressTensor(kinetic=kin, pressure=pres, quantum=quant)


def momentum_balance(states, V=None) -> list:
    """Pointwise ``d_t(rho v^i) + nabla_j T^{ij} + (rho/M) g^{ij} d_j V`` at interior times.

    ``states`` must be equally spaced in time; centred differences are used.
    """
    if len(states) < 3:
        raise ConfigurationError("momentum balance needs at least three consecutive states")
    times = np.array([s.t for s in states])
    dts = np.diff(times)
    if not np.allclose(dts, dts[0], rtol=1e-9, atol=0):
        raise ConfigurationError("states must be equally spaced in time")
    out = []
    for n in range(1, len(states) - 1):
        s = states[n]
        dmom = (states[n + 1].momentum_density - states[n - 1].momentum_density) / (times[n + 1] - times[n - 1])
        r = dmom + geo.tensor_divergence(s.chart, stress_tensor(s).total)
        if V is not None:
            r = r + s.rho * s.chart.g_inv * geo.gradient(s.chart, V) / s.mass
        out.append(r)
    return out


def momentum_balance_residual(states, V=None) -> float:
    """Root-mean-square over interior times of the L2 norm of the momentum balance."""
    chart = states[0].chart
    norms = [geo.vector_l2_norm(chart, r) for r in momentum_balance(states, V)]
    return float(np.sqrt(np.mean(np.square(norms))))
