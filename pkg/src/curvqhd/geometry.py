"""Spatial charts, their metric data and grid differential operators.

All built-in charts have diagonal metrics and at most two dimensions.  Grids
are cell centred: node ``j`` of an axis with ``n`` cells sits at
``lo + (j + 1/2) h``.  Differential operators act on arrays whose trailing
shape equals ``chart.cells`` and close their stencils with one layer of ghost
cells built by :func:`pad`.

Ricci tensors are reported in the convention where the round sphere has
positive curvature, ``R_j^k = +delta_j^k / a**2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, PoleError

KINDS = ("flat-line", "circle", "sphere2", "hyperbolic2", "bump2", "custom")
TOPOLOGIES = ("periodic", "pole", "reflective", "open")


@dataclass(frozen=True)
class MetricSample:
    g: np.ndarray
    g_inv: np.ndarray
    sqrt_g: float


@dataclass(frozen=True)
class ConnectionSample:
    gamma: np.ndarray  # gamma[i, j, k] = Gamma^i_{jk}


@dataclass(frozen=True)
class RicciSample:
    """Mixed Ricci tensor ``mixed[j, k] = R_j^k``.

    ``gamma`` is the logarithmic-nonlinearity constant of the equivalent
    Schroedinger equation, set only when the Ricci tensor is a constant
    multiple of the identity.  It obeys ``R_j^k = 2 gamma delta_j^k``: the
    contraction ``R^mu_{j l mu}`` used by the hydrodynamic equations is minus
    ``R_j^k`` and equals ``-2 gamma delta``.  The sphere therefore has
    ``gamma = +1/(2 a^2)``.
    """

    mixed: np.ndarray
    gamma: Optional[float] = None


@dataclass(frozen=True)
class Tetrad:
    frame: np.ndarray  # frame[i, a] = e^i_a
    coframe: np.ndarray  # coframe[a, i] = ebar^a_i


@dataclass(frozen=True, eq=False)
class Chart:
    """A 1-D or 2-D coordinate patch with a diagonal metric and a grid.

    Use the named constructors (:meth:`flat_line`, :meth:`circle`,
    :meth:`sphere2`, :meth:`hyperbolic2`, :meth:`bump2`, :meth:`custom`)
    rather than calling this directly.
    """

    kind: str
    bounds: tuple
    topology: tuple  # per axis: (low-end, high-end)
    cells: tuple
    radius: float = 1.0
    amplitude: float = 0.0
    width: float = 1.0
    metric_fn: Optional[Callable] = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown chart kind {self.kind!r}")
        d = len(self.cells)
        if d not in (1, 2) or len(self.bounds) != d or len(self.topology) != d:
            raise ConfigurationError("charts have 1 or 2 axes with bounds, topology and cells for each")
        for (lo, hi), topo, n in zip(self.bounds, self.topology, self.cells):
            if not hi > lo:
                raise ConfigurationError(f"empty axis bounds ({lo}, {hi})")
            if int(n) != n or n < 1:
                raise ConfigurationError(f"cells must be a positive integer, got {n}")
            for t in topo:
                if t not in TOPOLOGIES:
                    raise ConfigurationError(f"unknown boundary topology {t!r}")
            if ("periodic" in topo) and topo != ("periodic", "periodic"):
                raise ConfigurationError("periodic topology must apply to both ends of an axis")
        for k, topo in enumerate(self.topology):
            if "pole" in topo:
                if k != 0 or d != 2 or self.topology[1] != ("periodic", "periodic") or self.cells[1] % 2:
                    raise ConfigurationError(
                        "pole closure needs the pole on axis 0 and an even, periodic axis 1"
                    )
        if self.radius <= 0 or self.width <= 0:
            raise ConfigurationError("radius and width must be positive")

    # ------------------------------------------------------------------
    # constructors

    @classmethod
    def flat_line(cls, lo=-1.0, hi=1.0, cells=64, topology="periodic"):
        return cls("flat-line", ((lo, hi),), (_ends(topology),), (cells,))

    @classmethod
    def circle(cls, radius=1.0, cells=64):
        """Circle of radius ``radius``; the coordinate is the angle in [0, 2 pi)."""
        return cls("circle", ((0.0, 2 * math.pi),), (("periodic", "periodic"),), (cells,), radius=radius)

    @classmethod
    def sphere2(cls, radius=1.0, n_theta=32, n_phi=64):
        """Round sphere in (theta, phi); the poles are excluded by a half-cell offset."""
        return cls(
            "sphere2",
            ((0.0, math.pi), (0.0, 2 * math.pi)),
            (("pole", "pole"), ("periodic", "periodic")),
            (n_theta, n_phi),
            radius=radius,
        )

    @classmethod
    def hyperbolic2(cls, radius=1.0, chi_max=2.0, n_chi=32, n_phi=64, outer="open"):
        """Hyperbolic plane in geodesic polar coordinates, ``g = a^2 diag(1, sinh^2 chi)``."""
        return cls(
            "hyperbolic2",
            ((0.0, chi_max), (0.0, 2 * math.pi)),
            (("pole", outer), ("periodic", "periodic")),
            (n_chi, n_phi),
            radius=radius,
        )

    @classmethod
    def bump2(cls, amplitude=0.5, width=0.5, half_size=3.0, cells=64):
        """Conformally flat plane ``g = exp(2 b exp(-r^2/w^2)) delta`` on a periodic box."""
        n = cells if isinstance(cells, (tuple, list)) else (cells, cells)
        return cls(
            "bump2",
            ((-half_size, half_size), (-half_size, half_size)),
            (("periodic", "periodic"), ("periodic", "periodic")),
            tuple(n),
            amplitude=amplitude,
            width=width,
        )

    @classmethod
    def custom(cls, metric_fn, bounds, topology, cells):
        """Chart from a callable returning the diagonal metric entries.

        ``metric_fn(*coords)`` must return a sequence of ``d`` arrays
        ``g_kk`` broadcast against the coordinates.  Connection and curvature
        come from finite differences.
        """
        return cls(
            "custom",
            tuple(tuple(b) for b in bounds),
            tuple(_ends(t) for t in topology),
            tuple(cells),
            metric_fn=metric_fn,
        )

    # ------------------------------------------------------------------
    # grid description

    @property
    def dim(self) -> int:
        return len(self.cells)

    @cached_property
    def spacing(self) -> tuple:
        return tuple((hi - lo) / n for (lo, hi), n in zip(self.bounds, self.cells))

    @cached_property
    def axes(self) -> list:
        return [lo + (np.arange(n) + 0.5) * h for (lo, _), n, h in zip(self.bounds, self.cells, self.spacing)]

    @cached_property
    def coords(self) -> list:
        return np.meshgrid(*self.axes, indexing="ij")

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def has_constant_ricci(self) -> bool:
        return self.kind in ("flat-line", "circle", "sphere2", "hyperbolic2")

    def with_cells(self, cells) -> "Chart":
        """Same geometry on a different grid."""
        cells = tuple(cells) if isinstance(cells, (tuple, list)) else (cells,) * self.dim
        return Chart(self.kind, self.bounds, self.topology, cells, self.radius, self.amplitude,
                     self.width, self.metric_fn)

    def describe(self) -> dict:
        out = {"kind": self.kind, "cells": list(self.cells)}
        if self.kind in ("circle", "sphere2", "hyperbolic2"):
            out["radius"] = self.radius
        if self.kind == "bump2":
            out.update(amplitude=self.amplitude, width=self.width)
        out["bounds"] = [list(b) for b in self.bounds]
        out["topology"] = [list(t) for t in self.topology]
        return out

    # ------------------------------------------------------------------
    # closed-form geometry, vectorised over coordinate arrays

    def metric_diag(self, X: Sequence) -> np.ndarray:
        """Diagonal metric entries, shape ``(d, *X[0].shape)``."""
        X = [np.asarray(x, dtype=float) for x in X]
        shape = np.broadcast(*X).shape
        a2 = self.radius ** 2
        if self.kind == "flat-line":
            g = [np.ones(shape)]
        elif self.kind == "circle":
            g = [np.full(shape, a2)]
        elif self.kind == "sphere2":
            g = [np.full(shape, a2), a2 * np.sin(X[0]) ** 2 + 0 * X[1]]
        elif self.kind == "hyperbolic2":
            g = [np.full(shape, a2), a2 * np.sinh(X[0]) ** 2 + 0 * X[1]]
        elif self.kind == "bump2":
            c = np.exp(2 * self._bump_sigma(X))
            g = [c, c.copy()]
        else:
            g = [np.broadcast_to(np.asarray(gk, dtype=float), shape).copy() for gk in self.metric_fn(*X)]
        return np.array(g)

    def _bump_sigma(self, X):
        r2 = X[0] ** 2 + X[1] ** 2
        return self.amplitude * np.exp(-r2 / self.width ** 2)

    def christoffel_diag(self, X: Sequence) -> np.ndarray:
        """Closed-form ``Gamma^i_{jk}``, shape ``(d, d, d, *shape)``."""
        X = [np.asarray(x, dtype=float) for x in X]
        shape = np.broadcast(*X).shape
        d = self.dim
        G = np.zeros((d, d, d) + shape)
        if self.kind in ("flat-line", "circle"):
            return G
        if self.kind == "sphere2":
            s, c = np.sin(X[0]), np.cos(X[0])
            G[0, 1, 1] = -s * c + 0 * X[1]
            G[1, 0, 1] = G[1, 1, 0] = c / s + 0 * X[1]
        elif self.kind == "hyperbolic2":
            s, c = np.sinh(X[0]), np.cosh(X[0])
            G[0, 1, 1] = -s * c + 0 * X[1]
            G[1, 0, 1] = G[1, 1, 0] = c / s + 0 * X[1]
        elif self.kind == "bump2":
            sig = self._bump_sigma(X)
            ds = [-2 * X[0] / self.width ** 2 * sig, -2 * X[1] / self.width ** 2 * sig]
            for i in range(2):
                for j in range(2):
                    for k in range(2):
                        G[i, j, k] = (i == j) * ds[k] + (i == k) * ds[j] - (j == k) * ds[i]
        else:
            G = christoffel_fd_arrays(self, X)
        return G

    def curvature(self, X: Sequence) -> np.ndarray:
        """Scalar ``K`` with ``R_j^k = K delta_j^k`` (all built-in charts are isotropic)."""
        X = [np.asarray(x, dtype=float) for x in X]
        shape = np.broadcast(*X).shape
        if self.kind in ("flat-line", "circle"):
            return np.zeros(shape)
        if self.kind == "sphere2":
            return np.full(shape, 1.0 / self.radius ** 2)
        if self.kind == "hyperbolic2":
            return np.full(shape, -1.0 / self.radius ** 2)
        if self.kind == "bump2":
            sig = self._bump_sigma(X)
            r2 = X[0] ** 2 + X[1] ** 2
            w2 = self.width ** 2
            lap_sigma = sig * (4 * r2 / w2 ** 2 - 4 / w2)
            return -np.exp(-2 * sig) * lap_sigma
        raise ConfigurationError("custom charts have no closed-form curvature; use ricci_fd")

    def ricci_mixed_arrays(self, X: Sequence) -> np.ndarray:
        """``R_j^k`` on coordinate arrays, shape ``(d, d, *shape)``."""
        if self.kind == "custom":
            return ricci_fd_arrays(self, X)
        K = self.curvature(X)
        d = self.dim
        R = np.zeros((d, d) + K.shape)
        for j in range(d):
            R[j, j] = K
        return R

    # ------------------------------------------------------------------
    # cached grid fields

    @cached_property
    def g(self) -> np.ndarray:
        return self.metric_diag(self.coords)

    @cached_property
    def g_inv(self) -> np.ndarray:
        return 1.0 / self.g

    @cached_property
    def sqrt_g(self) -> np.ndarray:
        return np.sqrt(np.prod(self.g, axis=0))

    @cached_property
    def christoffel_grid(self) -> np.ndarray:
        return self.christoffel_diag(self.coords)

    @cached_property
    def ricci_grid(self) -> np.ndarray:
        return self.ricci_mixed_arrays(self.coords)

    def _face_coords(self, k):
        axes = list(self.axes)
        lo, _ = self.bounds[k]
        axes[k] = lo + np.arange(self.cells[k] + 1) * self.spacing[k]
        return np.meshgrid(*axes, indexing="ij")

    @cached_property
    def face_sqrt_g(self) -> list:
        """Per axis ``k``: ``sqrt(g)`` on the ``n_k + 1`` faces normal to ``k``."""
        out = []
        for k in range(self.dim):
            gd = self.metric_diag(self._face_coords(k))
            out.append(np.sqrt(np.abs(np.prod(gd, axis=0))))
        return out

    @cached_property
    def face_sqrt_g_ginv(self) -> list:
        """Per axis ``k``: ``sqrt(g) g^{kk}`` on the faces normal to ``k``."""
        out = []
        for k in range(self.dim):
            gd = self.metric_diag(self._face_coords(k))
            sg = np.sqrt(np.abs(np.prod(gd, axis=0)))
            with np.errstate(divide="ignore", invalid="ignore"):
                c = np.where(sg > 0, sg / gd[k], 0.0)
            out.append(c)
        return out

    @cached_property
    def min_physical_spacing(self) -> np.ndarray:
        """Smallest proper length of a cell edge along each axis."""
        return np.array([np.min(np.sqrt(self.g[k])) * self.spacing[k] for k in range(self.dim)])

    # ------------------------------------------------------------------
    # point checks

    def check_point(self, x) -> np.ndarray:
        """Validate a coordinate tuple; wraps periodic axes and returns it as an array."""
        x = np.atleast_1d(np.asarray(x, dtype=float)).copy()
        if x.shape != (self.dim,):
            raise DomainError(f"expected {self.dim} coordinates, got {x.shape}")
        for k, ((lo, hi), topo, h) in enumerate(zip(self.bounds, self.topology, self.spacing)):
            if topo[0] == "periodic":
                x[k] = lo + (x[k] - lo) % (hi - lo)
                continue
            if not lo <= x[k] <= hi:
                raise DomainError(f"coordinate {k} = {x[k]} outside [{lo}, {hi}]")
            tol = 0.5 * h * (1 - 1e-9)
            if (topo[0] == "pole" and x[k] - lo < tol) or (topo[1] == "pole" and hi - x[k] < tol):
                raise PoleError(f"coordinate {k} = {x[k]} within half a cell of a pole")
        return x


def _ends(topology):
    if isinstance(topology, str):
        return (topology, topology)
    lo, hi = topology
    return (lo, hi)


# ----------------------------------------------------------------------
# point operations


def metric_at(chart: Chart, x) -> MetricSample:
    x = chart.check_point(x)
    gd = chart.metric_diag([np.array(v) for v in x])
    g = np.diag(gd)
    return MetricSample(g=g, g_inv=np.diag(1.0 / gd), sqrt_g=float(math.sqrt(np.prod(gd))))


def christoffel(chart: Chart, x) -> ConnectionSample:
    x = chart.check_point(x)
    return ConnectionSample(chart.christoffel_diag([np.array(v) for v in x]))


def ricci_mixed(chart: Chart, x) -> RicciSample:
    x = chart.check_point(x)
    R = chart.ricci_mixed_arrays([np.array(v) for v in x])
    gamma = None
    if chart.has_constant_ricci:
        gamma = 0.5 * float(R[0, 0])
    return RicciSample(mixed=R, gamma=gamma)


def tetrad_at(chart: Chart, x) -> Tetrad:
    x = chart.check_point(x)
    gd = chart.metric_diag([np.array(v) for v in x])
    return Tetrad(frame=np.diag(1.0 / np.sqrt(gd)), coframe=np.diag(np.sqrt(gd)))


def chart_gamma(chart: Chart) -> float:
    """Nonlinearity constant for charts with constant isotropic Ricci tensor."""
    if not chart.has_constant_ricci:
        from .errors import RepresentabilityError

        raise RepresentabilityError(f"{chart.kind} has position-dependent curvature")
    return 0.5 * float(chart.ricci_mixed_arrays([np.array(0.5 * (lo + hi)) for lo, hi in chart.bounds])[0, 0])


# ----------------------------------------------------------------------
# finite-difference oracles built only on the metric


def _metric_matrix(chart, X):
    gd = chart.metric_diag(X)
    d = chart.dim
    shape = gd.shape[1:]
    g = np.zeros((d, d) + shape)
    for k in range(d):
        g[k, k] = gd[k]
    return g


def _fd(fun, X, k, h):
    Xp = [np.array(x, dtype=float) for x in X]
    Xm = [np.array(x, dtype=float) for x in X]
    Xp[k] = Xp[k] + h
    Xm[k] = Xm[k] - h
    return (fun(Xp) - fun(Xm)) / (2 * h)


def christoffel_fd_arrays(chart: Chart, X, h: float = 1e-4) -> np.ndarray:
    """Christoffel symbols from central differences of the metric (general formula)."""
    X = [np.asarray(x, dtype=float) for x in X]
    d = chart.dim
    g = _metric_matrix(chart, X)
    gi = np.moveaxis(np.linalg.inv(np.moveaxis(g, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    dg = np.array([_fd(lambda Y: _metric_matrix(chart, Y), X, k, h) for k in range(d)])  # dg[k, i, j]
    G = np.zeros((d, d, d) + g.shape[2:])
    for i in range(d):
        for j in range(d):
            for k in range(d):
                G[i, j, k] = 0.5 * sum(gi[i, l] * (dg[j, l, k] + dg[k, l, j] - dg[l, j, k]) for l in range(d))
    return G


def christoffel_fd(chart: Chart, x, h: float = 1e-4) -> ConnectionSample:
    x = chart.check_point(x)
    return ConnectionSample(christoffel_fd_arrays(chart, [np.array(v) for v in x], h))


def ricci_fd_arrays(chart: Chart, X, h: float = 1e-4) -> np.ndarray:
    """Mixed Ricci tensor from the Riemann tensor of finite-differenced Christoffels."""
    X = [np.asarray(x, dtype=float) for x in X]
    d = chart.dim

    def gam(Y):
        return christoffel_fd_arrays(chart, Y, h)

    G = gam(X)
    dG = np.array([_fd(gam, X, k, h) for k in range(d)])  # dG[m, r, n, s] = d_m Gamma^r_{ns}
    shape = G.shape[3:]
    riem = np.zeros((d, d, d, d) + shape)  # R^r_{s m n}
    for r in range(d):
        for s in range(d):
            for m in range(d):
                for n in range(d):
                    val = dG[m, r, n, s] - dG[n, r, m, s]
                    for l in range(d):
                        val = val + G[r, m, l] * G[l, n, s] - G[r, n, l] * G[l, m, s]
                    riem[r, s, m, n] = val
    ric = np.einsum("rsrn...->sn...", riem)  # R_{sn} = R^r_{s r n}
    g = _metric_matrix(chart, X)
    gi = np.moveaxis(np.linalg.inv(np.moveaxis(g, (0, 1), (-2, -1))), (-2, -1), (0, 1))
    return np.einsum("jl...,kl...->jk...", ric, gi)


def ricci_fd(chart: Chart, x, h: float = 1e-4) -> RicciSample:
    x = chart.check_point(x)
    return RicciSample(ricci_fd_arrays(chart, [np.array(v) for v in x], h))


# ----------------------------------------------------------------------
# grid operators


def _require_resolution(chart):
    if min(chart.cells) < 4:
        raise ConfigurationError("grid operators need at least 4 cells per axis")


def pad(chart: Chart, f: np.ndarray, parity=None) -> np.ndarray:
    """Add one ghost layer on every axis.

    ``parity[k]`` is the sign picked up by the field when reflected through a
    wall or carried through a pole along axis ``k`` (``-1`` for a vector
    component along that axis).  Open ends use quadratic extrapolation.
    """
    d = chart.dim
    parity = (1,) * d if parity is None else tuple(parity)
    out = f
    for k in range(d):
        topo = chart.topology[k]
        if topo[0] == "periodic":
            out = np.concatenate([_take(out, -1, k), out, _take(out, 0, k)], axis=k)
            continue
        n = out.shape[k]
        lo = _ghost(out, k, topo[0], parity[k], end=0, n=n, chart=chart)
        hi = _ghost(out, k, topo[1], parity[k], end=n - 1, n=n, chart=chart)
        out = np.concatenate([lo, out, hi], axis=k)
    return out


def _take(a, i, axis):
    return np.take(a, [i], axis=axis)


def _ghost(a, k, topo, sign, end, n, chart):
    inward = 1 if end == 0 else -1
    if topo == "pole":
        row = _take(a, end, k)
        # only axis 0 carries poles; shift the periodic axis by half a turn
        return sign * np.roll(row, chart.cells[1] // 2, axis=1)
    if topo == "reflective":
        return sign * _take(a, end, k)
    # open: quadratic extrapolation
    f0 = _take(a, end, k)
    f1 = _take(a, end + inward, k)
    f2 = _take(a, end + 2 * inward, k)
    return 3 * f0 - 3 * f1 + f2


def _shift(fp, k, s, d):
    """Slice of a padded array shifted by ``s`` in axis ``k`` (interior otherwise)."""
    idx = [slice(1, -1)] * d
    n = fp.shape[k] - 2
    idx[k] = slice(1 + s, 1 + s + n)
    return fp[tuple(idx)]


def partial(chart: Chart, f, k: int, parity=None) -> np.ndarray:
    """Central difference ``d_k f``."""
    _require_resolution(chart)
    fp = pad(chart, f, parity)
    d = chart.dim
    return (_shift(fp, k, 1, d) - _shift(fp, k, -1, d)) / (2 * chart.spacing[k])


def gradient(chart: Chart, f) -> np.ndarray:
    """Covariant components ``d_k f`` of a scalar, shape ``(d, *cells)``."""
    _require_resolution(chart)
    fp = pad(chart, f)
    d = chart.dim
    return np.array([(_shift(fp, k, 1, d) - _shift(fp, k, -1, d)) / (2 * chart.spacing[k]) for k in range(d)])


def raise_index(chart: Chart, w) -> np.ndarray:
    return chart.g_inv * w


def lower_index(chart: Chart, v) -> np.ndarray:
    return chart.g * v


def component_parity(chart: Chart, indices) -> tuple:
    """Ghost parity for a tensor component with the given axis indices."""
    return tuple((-1) ** sum(1 for i in indices if i == k) for k in range(chart.dim))


def second_partial(chart: Chart, f, i: int, j: int, parity=None) -> np.ndarray:
    _require_resolution(chart)
    fp = pad(chart, f, parity)
    d = chart.dim
    hi, hj = chart.spacing[i], chart.spacing[j]
    if i == j:
        return (_shift(fp, i, 1, d) - 2 * _shift(fp, i, 0, d) + _shift(fp, i, -1, d)) / hi ** 2
    n0, n1 = chart.cells

    def at(si, sj):
        s = [0, 0]
        s[i], s[j] = si, sj
        return fp[1 + s[0]:1 + s[0] + n0, 1 + s[1]:1 + s[1] + n1]

    return (at(1, 1) - at(1, -1) - at(-1, 1) + at(-1, -1)) / (4 * hi * hj)


def hessian(chart: Chart, f) -> np.ndarray:
    """Covariant Hessian ``d_i d_j f - Gamma^k_{ij} d_k f``, shape ``(d, d, *cells)``."""
    d = chart.dim
    df = gradient(chart, f)
    H = np.empty((d, d) + f.shape)
    G = chart.christoffel_grid
    for i in range(d):
        for j in range(i, d):
            H[i, j] = second_partial(chart, f, i, j) - np.einsum("k...,k...->...", G[:, i, j], df)
            H[j, i] = H[i, j]
    return H


def divergence(chart: Chart, V, parities=None) -> np.ndarray:
    """Flux-form ``(1/sqrt g) d_k (sqrt g V^k)`` of a contravariant vector field.

    Face values are arithmetic means of neighbouring nodes, so the sum of
    ``sqrt(g) div V`` over a closed grid vanishes to rounding.
    """
    _require_resolution(chart)
    d = chart.dim
    out = np.zeros(V.shape[1:])
    for k in range(d):
        par = component_parity(chart, (k,)) if parities is None else parities[k]
        full = pad(chart, V[k], par)[_interior_other(d, k)]
        sl_lo = [slice(None)] * d
        sl_hi = [slice(None)] * d
        sl_lo[k], sl_hi[k] = slice(None, -1), slice(1, None)
        face = 0.5 * (full[tuple(sl_lo)] + full[tuple(sl_hi)])
        flux = chart.face_sqrt_g[k] * face
        out += np.diff(flux, axis=k) / chart.spacing[k]
    return out / chart.sqrt_g


def _interior_other(d, k):
    idx = [slice(1, -1)] * d
    idx[k] = slice(None)
    return tuple(idx)


def laplace_beltrami(chart: Chart, f) -> np.ndarray:
    """Compact conservative ``(1/sqrt g) d_k (sqrt g g^{kk} d_k f)``.

    ``sqrt(g) * laplace_beltrami`` is a symmetric operator on closed grids.
    """
    _require_resolution(chart)
    d = chart.dim
    fp = pad(chart, f)
    out = np.zeros(f.shape)
    for k in range(d):
        full = fp[_interior_other(d, k)]
        grad_face = np.diff(full, axis=k) / chart.spacing[k]
        flux = chart.face_sqrt_g_ginv[k] * grad_face
        out += np.diff(flux, axis=k) / chart.spacing[k]
    return out / chart.sqrt_g


def tensor_divergence(chart: Chart, T) -> np.ndarray:
    """``nabla_j T^{ij}`` for a symmetric contravariant 2-tensor field."""
    d = chart.dim
    G = chart.christoffel_grid
    out = np.empty((d,) + T.shape[2:])
    for i in range(d):
        parities = [component_parity(chart, (i, j)) for j in range(d)]
        out[i] = divergence(chart, T[i], parities) + np.einsum("jk...,jk...->...", G[i], T)
    return out


def integrate(chart: Chart, f) -> float:
    return float(np.sum(f * chart.sqrt_g) * chart.cell_volume)


def l2_norm(chart: Chart, f) -> float:
    return math.sqrt(integrate(chart, np.abs(f) ** 2))


def vector_l2_norm(chart: Chart, V) -> float:
    """L2 norm of a contravariant vector field using ``g_ij V^i V^j``."""
    return math.sqrt(integrate(chart, np.sum(chart.g * V ** 2, axis=0)))


def tetrad_grid(chart: Chart) -> np.ndarray:
    """Diagonal tetrad on the grid, shape ``(d, d, *cells)``."""
    d = chart.dim
    e = np.zeros((d, d) + chart.cells)
    for k in range(d):
        e[k, k] = 1.0 / np.sqrt(chart.g[k])
    return e


def laplace_beltrami_matrix(chart: Chart):
    """Sparse matrix of :func:`laplace_beltrami` acting on C-ordered flattened fields."""
    import scipy.sparse as sp

    _require_resolution(chart)
    d = chart.dim
    N = int(np.prod(chart.cells))
    idx = np.arange(N).reshape(chart.cells)
    rows, cols, vals = [], [], []

    def add(r, c, v):
        rows.append(r.ravel())
        cols.append(c.ravel())
        vals.append(np.broadcast_to(v, r.shape).ravel())

    inv_sg = 1.0 / chart.sqrt_g
    for k in range(d):
        n, h = chart.cells[k], chart.spacing[k]
        c = chart.face_sqrt_g_ginv[k] / h ** 2  # faces 0..n

        def sl(a, i):
            return np.take(a, i, axis=k)

        # interior faces j+1/2 between cells j and j+1
        for j in range(n - 1):
            cf = sl(c, j + 1)
            a, b = sl(idx, j), sl(idx, j + 1)
            wa, wb = sl(inv_sg, j), sl(inv_sg, j + 1)
            add(a, b, cf * wa)
            add(a, a, -cf * wa)
            add(b, a, cf * wb)
            add(b, b, -cf * wb)
        lo, hi = chart.topology[k]
        if lo == "periodic":
            cf = sl(c, 0)
            a, b = sl(idx, n - 1), sl(idx, 0)
            wa, wb = sl(inv_sg, n - 1), sl(inv_sg, 0)
            add(a, b, cf * wa)
            add(a, a, -cf * wa)
            add(b, a, cf * wb)
            add(b, b, -cf * wb)
            continue
        for end, face, step in ((lo, 0, 1), (hi, n, -1)):
            if end != "open":
                continue  # pole faces carry zero weight, reflective walls zero flux
            j0 = 0 if step == 1 else n - 1
            cf = sl(c, face) * sl(inv_sg, j0)
            r = sl(idx, j0)
            # ghost = 3 f0 - 3 f1 + f2 ; face flux toward the ghost is cf (ghost - f0)
            add(r, r, 2 * cf)
            add(r, sl(idx, j0 + step), -3 * cf)
            add(r, sl(idx, j0 + 2 * step), cf)
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N))
