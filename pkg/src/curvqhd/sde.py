"""Forward/backward stochastic kinematics with parallel-transported frames.

Walkers obey

    dx^i = u^i dt + sqrt(hbar/M) e^i_a o dW^a,     de^i_a = -Gamma^i_{jk} e^k_a o dx^j

with Stratonovich products realised by a midpoint predictor-corrector.  A
backward ensemble is run with ``dt < 0`` and the backward drift ``u_-``;
its noise has the same correlations as the forward one.

Random numbers come from a counter-based generator keyed by
``(seed, step)`` with the walker id as the counter, so the noise seen by a
walker does not depend on how the ensemble is split across workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.ndimage import map_coordinates

from . import geometry as geo
from .errors import ConfigurationError, DomainError

RENORM_THRESHOLD = 1e-11


# ----------------------------------------------------------------------
# noise


def walker_normals(seed: int, step: int, ids: np.ndarray, d: int) -> np.ndarray:
    """Standard normals of shape ``(len(ids), d)``; row ``n`` depends only on ``(seed, step, ids[n])``."""
    if d > 2:
        raise ConfigurationError("at most two noise components")
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size == 0:
        return np.zeros((0, d))
    i0, i1 = int(ids.min()), int(ids.max())
    bg = np.random.Philox(key=[seed % 2 ** 64, step % 2 ** 64], counter=[i0, 0, 0, 0])
    raw = bg.random_raw(4 * (i1 - i0 + 1)).reshape(-1, 4)[ids - i0]
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0 ** -53
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.stack([r * np.cos(2 * np.pi * u2), r * np.sin(2 * np.pi * u2)], axis=1)
    return z[:, :d]


# ----------------------------------------------------------------------
# drift fields


@dataclass(frozen=True, eq=False)
class DriftField:
    """Contravariant vector field on the chart grid, interpolated to walker positions."""

    chart: geo.Chart
    values: np.ndarray  # (d, *cells)
    tag: str = "u+"

    def __post_init__(self):
        if self.tag not in ("u+", "u-", "v"):
            raise ConfigurationError(f"unknown drift tag {self.tag!r}")
        if self.values.shape != (self.chart.dim,) + self.chart.cells:
            raise ConfigurationError("drift field shape does not match the chart grid")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("drift field must be finite")

    def __call__(self, x: np.ndarray, t: float = 0.0) -> np.ndarray:
        return interpolate(self.chart, self.values, x)


@dataclass(frozen=True, eq=False)
class DriftSeries:
    """Drift fields sampled at increasing times, linearly interpolated in time."""

    times: np.ndarray
    fields: list

    def __call__(self, x, t):
        ts = self.times
        if t <= ts[0]:
            return self.fields[0](x)
        if t >= ts[-1]:
            return self.fields[-1](x)
        n = int(np.searchsorted(ts, t, side="right") - 1)
        w = (t - ts[n]) / (ts[n + 1] - ts[n])
        if w < 1e-12:
            return self.fields[n](x)
        if w > 1 - 1e-12:
            return self.fields[n + 1](x)
        return (1 - w) * self.fields[n](x) + w * self.fields[n + 1](x)


def interpolate(chart: geo.Chart, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear interpolation of grid components ``values[c]`` at points ``x`` (N, d)."""
    d = chart.dim
    pos = np.empty((d, x.shape[0]))
    for k in range(d):
        lo, _ = chart.bounds[k]
        pos[k] = (x[:, k] - lo) / chart.spacing[k] - 0.5
    periodic = all(t[0] == "periodic" for t in chart.topology)
    mode = "grid-wrap" if periodic else "nearest"
    if not periodic:
        # wrap periodic axes by hand, clamp the rest
        for k in range(d):
            if chart.topology[k][0] == "periodic":
                pos[k] = np.mod(pos[k] + 0.5, chart.cells[k]) - 0.5
    out = np.empty((values.shape[0], x.shape[0]))
    for c in range(values.shape[0]):
        if periodic or d == 1:
            out[c] = map_coordinates(values[c], pos, order=1, mode=mode)
        else:
            # pad the periodic axis so interpolation across the seam is exact
            padded = np.concatenate([values[c][:, -1:], values[c], values[c][:, :1]], axis=1)
            p = pos.copy()
            p[1] = p[1] + 1
            out[c] = map_coordinates(padded, p, order=1, mode="nearest")
    return out.T


# ----------------------------------------------------------------------
# walkers


@dataclass(frozen=True)
class Walker:
    position: np.ndarray
    frame: np.ndarray  # frame[i, a] = e^i_a
    stream_id: int = 0
    active: bool = True


@dataclass(frozen=True, eq=False)
class Ensemble:
    chart: geo.Chart
    positions: np.ndarray  # (N, d)
    frames: np.ndarray  # (N, d, d)
    ids: np.ndarray
    diffusion: float = 1.0  # hbar / M
    t: float = 0.0
    direction: str = "forward"
    seed: int = 0
    step_index: int = 0
    active: Optional[np.ndarray] = None
    escapes: int = 0

    def __post_init__(self):
        N = self.positions.shape[0]
        if N < 1:
            raise ConfigurationError("an ensemble needs at least one walker")
        if self.direction not in ("forward", "backward"):
            raise ConfigurationError("direction must be 'forward' or 'backward'")
        if self.active is None:
            object.__setattr__(self, "active", np.ones(N, dtype=bool))

    @property
    def size(self) -> int:
        return self.positions.shape[0]

    def walker(self, n: int) -> Walker:
        return Walker(self.positions[n].copy(), self.frames[n].copy(), int(self.ids[n]), bool(self.active[n]))


def canonical_frames(chart: geo.Chart, x: np.ndarray) -> np.ndarray:
    """Diagonal orthonormal frames ``e^i_a = delta^i_a / sqrt(g_ii)`` at points ``x``."""
    gd = chart.metric_diag([x[:, k] for k in range(chart.dim)])  # (d, N)
    N, d = x.shape
    e = np.zeros((N, d, d))
    for k in range(d):
        e[:, k, k] = 1.0 / np.sqrt(gd[k])
    return e


def make_ensemble(chart, positions, *, diffusion=1.0, seed=0, t=0.0, direction="forward") -> Ensemble:
    x = np.atleast_2d(np.asarray(positions, dtype=float))
    if x.shape[1] != chart.dim:
        x = x.reshape(-1, chart.dim)
    return Ensemble(chart, x.copy(), canonical_frames(chart, x), np.arange(x.shape[0]), diffusion, t,
                    direction, seed)


def frame_residual(chart: geo.Chart, x: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Per walker ``max_ab |g_ij e^i_a e^j_b - delta_ab|``."""
    gd = chart.metric_diag([x[:, k] for k in range(chart.dim)]).T  # (N, d)
    G = np.einsum("ni,nia,nib->nab", gd, e, e)
    return np.max(np.abs(G - np.eye(chart.dim)), axis=(1, 2))


def orthonormalize(chart: geo.Chart, x: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Gram-Schmidt of the frame columns with respect to ``g_ij`` at ``x``."""
    gd = chart.metric_diag([x[:, k] for k in range(chart.dim)]).T
    out = e.copy()
    d = chart.dim
    for a in range(d):
        col = out[:, :, a]
        for b in range(a):
            prev = out[:, :, b]
            col = col - np.sum(gd * col * prev, axis=1)[:, None] * prev
        out[:, :, a] = col / np.sqrt(np.sum(gd * col * col, axis=1))[:, None]
    return out


def transport_frames(chart, x_mid, e_mid, dx) -> np.ndarray:
    """Frame increment ``-Gamma^i_{jk}(x_mid) e^k_a dx^j``."""
    G = chart.christoffel_diag([x_mid[:, k] for k in range(chart.dim)])  # (d, d, d, N)
    return -np.einsum("ijkn,nj,nka->nia", G, dx, e_mid)


def transport_tetrad(walker: Walker, dx, chart: geo.Chart, *, x_mid=None, renormalize=True,
                     threshold=RENORM_THRESHOLD) -> Walker:
    """Parallel-transport a walker's frame along the increment ``dx``.

    The connection is evaluated at ``x_mid`` (default: the midpoint of the
    increment) and the frame at the implicit midpoint, which a single
    fixed-point pass approximates to second order.
    """
    x = walker.position[None, :]
    dx = np.asarray(dx, dtype=float)[None, :]
    xm = x + 0.5 * dx if x_mid is None else np.asarray(x_mid, dtype=float)[None, :]
    e = walker.frame[None]
    e_pred = e + transport_frames(chart, xm, e, dx)
    e_new = e + transport_frames(chart, xm, 0.5 * (e + e_pred), dx)
    x_new = _wrap(chart, x + dx)
    if renormalize and frame_residual(chart, x_new, e_new)[0] > threshold:
        e_new = orthonormalize(chart, x_new, e_new)
    return replace(walker, position=x_new[0], frame=e_new[0])


def _wrap(chart, x):
    x = x.copy()
    for k, ((lo, hi), topo) in enumerate(zip(chart.bounds, chart.topology)):
        if topo[0] == "periodic":
            x[:, k] = lo + np.mod(x[:, k] - lo, hi - lo)
    return x


def _boundaries(chart, x, e, active):
    """Apply wall reflections; return ``(x, e, escaped_mask)``."""
    escaped = np.zeros(x.shape[0], dtype=bool)
    for k, ((lo, hi), topo, h) in enumerate(zip(chart.bounds, chart.topology, chart.spacing)):
        if topo[0] == "periodic":
            continue
        for end, wall, sgn in ((0, lo, 1), (1, hi, -1)):
            kind = topo[end]
            beyond = (x[:, k] - wall) * sgn < 0
            if kind == "reflective":
                x[beyond, k] = 2 * wall - x[beyond, k]
                e[beyond, k, :] *= -1
            elif kind == "pole":
                escaped |= (x[:, k] - wall) * sgn < 0.5 * h
            else:
                escaped |= beyond
    return x, e, escaped & active


def _step_arrays(chart, x, e, ids, drift, t, dt, s, seed, step_index, renormalize, threshold):
    d = chart.dim
    dW = walker_normals(seed, step_index, ids, d) * math.sqrt(abs(dt))
    u0 = drift(x, t)
    dx_p = u0 * dt + s * np.einsum("nia,na->ni", e, dW)
    de_p = transport_frames(chart, x, e, dx_p)
    xm = _wrap(chart, x + 0.5 * dx_p)
    em = e + 0.5 * de_p
    um = drift(xm, t + 0.5 * dt)
    dx = um * dt + s * np.einsum("nia,na->ni", em, dW)
    de = transport_frames(chart, xm, em, dx)
    x_new = _wrap(chart, x + dx)
    e_new = e + de
    if renormalize:
        bad = frame_residual(chart, x_new, e_new) > threshold
        if np.any(bad):
            e_new[bad] = orthonormalize(chart, x_new[bad], e_new[bad])
    return x_new, e_new


def step_ensemble(ens: Ensemble, drift: Union[DriftField, Callable], dt: float, *, renormalize=True,
                  threshold=RENORM_THRESHOLD, workers: int = 1) -> Ensemble:
    """Advance every active walker by one midpoint (Heun-type) Stratonovich step."""
    if (dt > 0) != (ens.direction == "forward") or dt == 0:
        raise ConfigurationError(f"dt={dt} does not match the {ens.direction} direction of the ensemble")
    chart = ens.chart
    s = math.sqrt(ens.diffusion)
    act = np.flatnonzero(ens.active)
    x, e = ens.positions.copy(), ens.frames.copy()
    if act.size:
        chunks = np.array_split(act, max(1, min(workers, act.size)))

        def run(idx):
            return idx, _step_arrays(chart, x[idx], e[idx], ens.ids[idx], drift, ens.t, dt, s, ens.seed,
                                     ens.step_index, renormalize, threshold)

        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(run, chunks))
        else:
            results = [run(c) for c in chunks]
        for idx, (xn, en) in results:
            x[idx], e[idx] = xn, en
    x, e, escaped = _boundaries(chart, x, e, ens.active)
    active = ens.active & ~escaped
    x[~active] = ens.positions[~active]
    e[~active] = ens.frames[~active]
    return replace(ens, positions=x, frames=e, t=ens.t + dt, step_index=ens.step_index + 1, active=active,
                   escapes=ens.escapes + int(escaped.sum()))


def step(walker: Walker, drift, dt: float, chart: geo.Chart, *, diffusion=1.0, seed=0, step_index=0,
         t=0.0, renormalize=True, threshold=RENORM_THRESHOLD) -> Walker:
    """Single-walker form of :func:`step_ensemble` (the walker's ``stream_id`` keys its noise)."""
    ens = Ensemble(chart, walker.position[None, :].astype(float), walker.frame[None].astype(float),
                   np.array([walker.stream_id]), diffusion, t, "forward" if dt > 0 else "backward", seed,
                   step_index, np.array([walker.active]))
    out = step_ensemble(ens, drift, dt, renormalize=renormalize, threshold=threshold)
    return out.walker(0)


def advance(ens: Ensemble, drift, dt: float, steps: int, **kw) -> Ensemble:
    for _ in range(steps):
        ens = step_ensemble(ens, drift, dt, **kw)
    return ens


# ----------------------------------------------------------------------
# densities and drift relations


@dataclass(frozen=True, eq=False)
class DensityEstimate:
    rho: np.ndarray
    counts: np.ndarray
    empty: np.ndarray
    samples: int


def estimate_density(ens: Ensemble, chart: Optional[geo.Chart] = None, *, method="histogram",
                     bandwidth=None) -> DensityEstimate:
    """Density of the active walkers on the grid of ``chart`` (default: the ensemble's).

    The histogram weights each count by the inverse cell volume ``sqrt(g) h^d``
    so that ``integrate(chart, rho) == 1``.  The kernel option uses a Gaussian
    in geodesic distance (flat-line, circle and sphere2 only).
    """
    chart = ens.chart if chart is None else chart
    x = ens.positions[ens.active]
    n = x.shape[0]
    if n == 0:
        raise DomainError("no active walkers")
    d = chart.dim
    flat = np.zeros(n, dtype=np.int64)
    for k in range(d):
        lo, _ = chart.bounds[k]
        i = np.floor((x[:, k] - lo) / chart.spacing[k]).astype(np.int64)
        i = np.clip(i, 0, chart.cells[k] - 1)
        flat = flat * chart.cells[k] + i
    counts = np.bincount(flat, minlength=int(np.prod(chart.cells))).reshape(chart.cells)
    vol = chart.sqrt_g * chart.cell_volume
    if method == "histogram":
        rho = counts / (n * vol)
    elif method == "kernel":
        rho = _kernel_density(chart, x, bandwidth)
    else:
        raise ConfigurationError(f"unknown density method {method!r}")
    return DensityEstimate(rho, counts, counts == 0, n)


def _kernel_density(chart, x, bandwidth):
    if bandwidth is None:
        bandwidth = 2 * max(chart.spacing) * (chart.radius if chart.kind in ("circle", "sphere2") else 1.0)
    nodes = np.stack([c.ravel() for c in chart.coords], axis=1)
    acc = np.zeros(nodes.shape[0])
    for start in range(0, x.shape[0], 2048):
        dist = geodesic_distance(chart, nodes[:, None, :], x[None, start:start + 2048, :])
        acc += np.exp(-0.5 * (dist / bandwidth) ** 2).sum(axis=1)
    rho = acc.reshape(chart.cells)
    return rho / geo.integrate(chart, rho)


def geodesic_distance(chart, p, q):
    """Geodesic distance between coordinate points (last axis = coordinates)."""
    if chart.kind == "flat-line":
        return np.abs(p[..., 0] - q[..., 0])
    if chart.kind == "circle":
        dphi = np.abs(p[..., 0] - q[..., 0]) % (2 * np.pi)
        return chart.radius * np.minimum(dphi, 2 * np.pi - dphi)
    if chart.kind == "sphere2":
        c = (np.cos(p[..., 0]) * np.cos(q[..., 0])
             + np.sin(p[..., 0]) * np.sin(q[..., 0]) * np.cos(p[..., 1] - q[..., 1]))
        return chart.radius * np.arccos(np.clip(c, -1.0, 1.0))
    raise ConfigurationError(f"no geodesic distance for {chart.kind}")


def _log_gradient(chart, rho):
    rho = np.asarray(rho, dtype=float)
    if np.any(~(rho > 0)):
        raise DomainError("density must be positive everywhere")
    return chart.g_inv * geo.gradient(chart, np.log(rho))


def drifts_from_hydro(rho, v, chart, diffusion=1.0):
    """``u_+ = v + (D/2) grad ln rho`` and ``u_- = v - (D/2) grad ln rho`` with ``D = hbar/M``."""
    osm = 0.5 * diffusion * _log_gradient(chart, rho)
    v = np.asarray(v, dtype=float)
    return DriftField(chart, v + osm, "u+"), DriftField(chart, v - osm, "u-")


def consistency_residual(rho, u_plus, u_minus, chart, diffusion=1.0) -> np.ndarray:
    """``u_+ - u_- - D g^{ij} d_j ln rho``; vanishes when both drifts describe one process."""
    up = u_plus.values if isinstance(u_plus, DriftField) else np.asarray(u_plus)
    um = u_minus.values if isinstance(u_minus, DriftField) else np.asarray(u_minus)
    return up - um - diffusion * _log_gradient(chart, rho)


def continuity_residual(rho_series, v, chart, dt) -> float:
    """RMS over time of the L2 norm of ``d_t rho + div(rho v)`` (trapezoidal in time)."""
    if len(rho_series) < 2:
        raise ConfigurationError("need densities at two or more times")
    vs = v if isinstance(v, (list, tuple)) else [v] * len(rho_series)
    norms = []
    for n in range(len(rho_series) - 1):
        r0, r1 = rho_series[n], rho_series[n + 1]
        flux = 0.5 * (r0 * vs[n] + r1 * vs[n + 1])
        res = (r1 - r0) / dt + geo.divergence(chart, flux)
        norms.append(geo.l2_norm(chart, res))
    return float(np.sqrt(np.mean(np.square(norms))))


def solve_continuity(chart, rho0, velocity: Callable, dt, steps, every=1) -> list:
    """SSP-RK3 solution of ``d_t rho + div(rho v) = 0`` for a prescribed ``velocity(t)``.

    Returns ``[(t, rho), ...]`` sampled every ``every`` steps.
    """
    rho, t = np.asarray(rho0, dtype=float), 0.0
    out = [(t, rho)]

    def f(r, tt):
        return -geo.divergence(chart, r * velocity(tt))

    for n in range(1, steps + 1):
        r1 = rho + dt * f(rho, t)
        r2 = 0.75 * rho + 0.25 * (r1 + dt * f(r1, t + dt))
        rho = rho / 3 + 2 / 3 * (r2 + dt * f(r2, t + 0.5 * dt))
        t = n * dt
        if n % every == 0:
            out.append((t, rho))
    return out


def bin_probabilities(chart, rho, bins: int) -> np.ndarray:
    """Probability mass of ``rho`` (1-D, on ``chart``) aggregated into ``bins`` equal bins."""
    if chart.dim != 1 or chart.cells[0] % bins:
        raise ConfigurationError("bin aggregation needs a 1-D grid divisible by the bin count")
    mass = rho * chart.sqrt_g * chart.cell_volume
    return mass.reshape(bins, -1).sum(axis=1)
