"""Homogeneous FRW estimates of the quantum-curvature pressure shift.

All quantities are SI.  Each formula is registered with its unit so that
:func:`check_dimensions` can verify the algebra symbolically.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

from .errors import ConfigurationError

# CODATA 2018 exact/recommended values
HBAR = 1.054571817e-34  # J s (exact, from h = 6.62607015e-34 J s)
C_LIGHT = 299792458.0  # m/s (exact)
G_NEWTON = 6.67430e-11  # m^3 kg^-1 s^-2 (CODATA 2018)

HUBBLE_DEFAULT = 2.2e-18  # 1/s, about 68 km/s/Mpc
HYDROGEN_MASS = 1.67e-27  # kg
LAMBDA_OBSERVED = 1e-52  # 1/m^2, order of the accepted cosmological constant


class Dim(NamedTuple):
    """Exponents of (kg, m, s)."""

    kg: float = 0
    m: float = 0
    s: float = 0

    def __mul__(self, other):
        return Dim(*(a + b for a, b in zip(self, other)))

    def __truediv__(self, other):
        return Dim(*(a - b for a, b in zip(self, other)))

    def __pow__(self, p):
        return Dim(*(a * p for a in self))


ONE = Dim()
KG, M, S = Dim(1, 0, 0), Dim(0, 1, 0), Dim(0, 0, 1)
JOULE = KG * M ** 2 / S ** 2
DIMS = {
    "hbar": JOULE * S,
    "c": M / S,
    "G": M ** 3 / KG / S ** 2,
    "H0": ONE / S,
    "M": KG,
    "Omega_m": ONE,
    "eps": JOULE / M ** 3,
    "P": JOULE / M ** 3,
}

# formula id -> (unit label, expected dimension)
FORMULAS = {
    "alpha": ("1", ONE),
    "critical_energy_density": ("J/m^3", JOULE / M ** 3),
    "drho_dt_from_conservation": ("kg/m^4", KG / M ** 4),
    "lambda_qc_from_drho": ("1/m^2", ONE / M ** 2),
    "lambda_qc_from_energy": ("1/m^2", ONE / M ** 2),
    "pressure_shift": ("J/m^3", JOULE / M ** 3),
    "lambda_ratio": ("1", ONE),
}


def check_dimensions() -> dict:
    """Recompute every formula's dimension from its inputs; raise on mismatch."""
    d = DIMS
    x0 = M  # x^0 = c t
    derived = {
        "alpha": (d["hbar"] * d["H0"] / (d["M"] * d["c"] ** 2)) ** 2,
        "critical_energy_density": d["H0"] ** 2 * d["c"] ** 2 / d["G"],
        "drho_dt_from_conservation": d["c"] ** -3 * d["Omega_m"] * d["H0"] * d["eps"],
    }
    derived["lambda_qc_from_drho"] = (d["hbar"] ** 2 * d["G"] / (d["M"] ** 2 * d["c"] ** 5) * d["H0"]
                                      * derived["drho_dt_from_conservation"])
    derived["lambda_qc_from_energy"] = d["G"] / d["c"] ** 4 * derived["alpha"] * d["Omega_m"] * d["eps"]
    derived["pressure_shift"] = d["c"] ** 4 / d["G"] * derived["lambda_qc_from_drho"]
    derived["lambda_ratio"] = derived["lambda_qc_from_energy"] / (ONE / M ** 2)
    # the mass-density drift is per unit x^0, i.e. (kg/m^3)/m
    assert KG / M ** 3 / x0 == FORMULAS["drho_dt_from_conservation"][1]
    for name, dim in derived.items():
        want = FORMULAS[name][1]
        if any(abs(a - b) > 1e-12 for a, b in zip(dim, want)):
            raise AssertionError(f"dimension mismatch in {name}: {dim} != {want}")
    return {name: FORMULAS[name][0] for name in derived}


@dataclass(frozen=True)
class CosmologyParams:
    H0: float = HUBBLE_DEFAULT
    M: float = HYDROGEN_MASS
    Omega_m: float = 0.1
    eps: float = None  # total energy density; defaults to the critical value
    P: float = 0.0
    K: int = 0
    a: float = 1.0
    hbar: float = HBAR
    c: float = C_LIGHT
    G: float = G_NEWTON

    def __post_init__(self):
        if self.eps is None:
            object.__setattr__(self, "eps", critical_energy_density(self.H0, self.c, self.G))
        problems = []
        if not self.H0 > 0:
            problems.append("H0 must be positive")
        if not self.M > 0:
            problems.append("M must be positive")
        if not 0 < self.Omega_m <= 1:
            problems.append("Omega_m must lie in (0, 1]")
        if self.eps + self.P < 0:
            problems.append("eps + P must be non-negative (null energy condition)")
        if self.K not in (-1, 0, 1):
            problems.append("K must be -1, 0 or 1")
        if problems:
            raise ConfigurationError("; ".join(problems))

    def with_(self, **kw) -> "CosmologyParams":
        return replace(self, **kw)


def critical_energy_density(H0: float, c: float = C_LIGHT, G: float = G_NEWTON) -> float:
    """``3 H0^2 c^2 / (8 pi G)`` in J/m^3."""
    return 3 * H0 ** 2 * c ** 2 / (8 * math.pi * G)


def alpha(p: CosmologyParams) -> float:
    """``(hbar H0 / (M c^2))^2``."""
    return (p.hbar * p.H0 / (p.M * p.c ** 2)) ** 2


def drho_dt_from_conservation(p: CosmologyParams) -> float:
    """Mass-density drift per unit ``x^0 = c t``: ``-3 Omega_m H0 (eps + P) / c^3``."""
    return -3 * p.Omega_m * p.H0 * (p.eps + p.P) / p.c ** 3


def lambda_qc_from_drho(p: CosmologyParams, drho: float) -> float:
    """``-(2 pi hbar^2 G / (M^2 c^5)) H0 d_0 rho_M``."""
    return -2 * math.pi * p.hbar ** 2 * p.G / (p.M ** 2 * p.c ** 5) * p.H0 * drho


def pressure_shift(p: CosmologyParams, lambda_qc: float) -> float:
    """Isotropic stress shift ``-(c^4 / 8 pi G) Lambda_QC``."""
    return -p.c ** 4 / (8 * math.pi * p.G) * lambda_qc


def lambda_qc_from_energy(p: CosmologyParams) -> float:
    """``(6 pi G / c^4) alpha Omega_m (eps + P)``; non-negative under the null energy condition."""
    return 6 * math.pi * p.G / p.c ** 4 * alpha(p) * p.Omega_m * (p.eps + p.P)


@dataclass
class CosmoRow:
    M: float
    H0: float
    Omega_m: float
    eps_plus_P: float
    alpha: float
    drho: float
    lambda_qc_drho: float
    lambda_qc_energy: float
    pressure_shift: float
    ratio_to_lambda: float
    route_rel_diff: float = field(init=False)

    def __post_init__(self):
        self.route_rel_diff = abs(self.lambda_qc_drho - self.lambda_qc_energy) / abs(self.lambda_qc_energy) \
            if self.lambda_qc_energy else abs(self.lambda_qc_drho)


def evaluate(p: CosmologyParams, lambda_obs: float = LAMBDA_OBSERVED) -> CosmoRow:
    drho = drho_dt_from_conservation(p)
    lam_d = lambda_qc_from_drho(p, drho)
    lam_e = lambda_qc_from_energy(p)
    return CosmoRow(p.M, p.H0, p.Omega_m, p.eps + p.P, alpha(p), drho, lam_d, lam_e, pressure_shift(p, lam_d),
                    lam_e / lambda_obs)


def sweep(masses, hubbles, omegas, *, base: CosmologyParams = None, critical=True) -> list:
    """Evaluate every combination; with ``critical`` the energy density follows each ``H0``."""
    base = CosmologyParams() if base is None else base
    rows = []
    for M_ in masses:
        for H in hubbles:
            for om in omegas:
                eps = critical_energy_density(H, base.c, base.G) if critical else base.eps
                rows.append(evaluate(base.with_(M=M_, H0=H, Omega_m=om, eps=eps)))
    return rows
