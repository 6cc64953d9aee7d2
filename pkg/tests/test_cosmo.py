import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvqhd import cosmo
from curvqhd.errors import ConfigurationError

# independent literal constants for the arithmetic oracles
HBAR, C, G = 1.054571817e-34, 299792458.0, 6.67430e-11


def test_alpha_for_hydrogen():
    a = cosmo.alpha(cosmo.CosmologyParams(H0=2.2e-18, M=1.67e-27))
    assert a == pytest.approx((HBAR * 2.2e-18 / (1.67e-27 * C ** 2)) ** 2, rel=1e-14)
    assert 2.3e-84 < a < 2.5e-84
    assert round(math.log10(a)) == -84


def test_alpha_limits_and_scaling():
    p = cosmo.CosmologyParams()
    assert cosmo.alpha(p.with_(hbar=0.0)) == 0.0
    assert cosmo.alpha(p.with_(M=2 * p.M)) == pytest.approx(cosmo.alpha(p) / 4, rel=1e-15)


def test_critical_energy_density():
    eps = cosmo.critical_energy_density(2.2e-18)
    assert eps == pytest.approx(3 * (2.2e-18) ** 2 * C ** 2 / (8 * math.pi * G), rel=1e-14)
    assert eps == pytest.approx(7.8e-10, rel=0.02)
    assert cosmo.critical_energy_density(4.4e-18) == pytest.approx(4 * eps, rel=1e-15)
    assert cosmo.critical_energy_density(0.0) == 0.0
    assert cosmo.CosmologyParams().eps == eps


def test_density_drift():
    p = cosmo.CosmologyParams(Omega_m=0.1)
    eps = 3 * (2.2e-18) ** 2 * C ** 2 / (8 * math.pi * G)
    oracle = -3 * 0.1 * 2.2e-18 * eps / C ** 3
    d = cosmo.drho_dt_from_conservation(p)
    assert d == pytest.approx(oracle, rel=1e-14)
    assert d == pytest.approx(-1.9e-53, rel=0.03)
    assert cosmo.drho_dt_from_conservation(p.with_(eps=1e-9, P=-1e-9)) == 0.0


def test_lambda_qc_values():
    p = cosmo.CosmologyParams()
    lam = cosmo.lambda_qc_from_drho(p, cosmo.drho_dt_from_conservation(p))
    assert 2.5e-137 < lam < 3.5e-137
    assert round(math.log10(lam)) == -137
    assert cosmo.lambda_qc_from_energy(p) == pytest.approx(lam, rel=1e-14)
    assert cosmo.lambda_qc_from_drho(p, 0.0) == 0.0
    # a locally collapsing region (growing density) gives a negative term
    assert cosmo.lambda_qc_from_drho(p, 1e-50) < 0
    ratio = cosmo.evaluate(p).ratio_to_lambda
    assert round(math.log10(ratio)) == -85


def test_pressure_shift_sign_and_size():
    p = cosmo.CosmologyParams()
    lam = cosmo.lambda_qc_from_energy(p)
    shift = cosmo.pressure_shift(p, lam)
    assert shift == pytest.approx(-C ** 4 * lam / (8 * math.pi * G), rel=1e-14)
    assert shift < 0


valid = st.builds(
    cosmo.CosmologyParams,
    H0=st.floats(1e-19, 1e-16),
    M=st.floats(1e-31, 1e-20),
    Omega_m=st.floats(1e-3, 1.0),
    eps=st.floats(1e-12, 1e-6),
    P=st.floats(-1e-12, 1e-7),
)


@settings(max_examples=200)
@given(valid)
def test_routes_agree_and_lambda_is_non_negative(p):
    a = cosmo.lambda_qc_from_energy(p)
    b = cosmo.lambda_qc_from_drho(p, cosmo.drho_dt_from_conservation(p))
    assert a >= 0
    if a > 0:
        assert abs(a - b) / a < 1e-14
    else:
        assert b == 0


@settings(max_examples=50)
@given(p=valid, fk=st.floats(0.1, 10), fm=st.floats(0.1, 10), fs=st.floats(0.1, 10))
def test_formulas_transform_with_their_declared_units(p, fk, fm, fs):
    # express every input in rescaled units; each output must rescale by its own dimension
    def factor(dim):
        return fk ** dim.kg * fm ** dim.m * fs ** dim.s

    D = cosmo.DIMS
    q = p.with_(**{k: getattr(p, k) * factor(D[k]) for k in ("hbar", "c", "G", "H0", "M", "eps", "P")})
    F = cosmo.FORMULAS
    pairs = [
        ("alpha", cosmo.alpha(p), cosmo.alpha(q)),
        ("critical_energy_density", cosmo.critical_energy_density(p.H0, p.c, p.G),
         cosmo.critical_energy_density(q.H0, q.c, q.G)),
        ("drho_dt_from_conservation", cosmo.drho_dt_from_conservation(p), cosmo.drho_dt_from_conservation(q)),
        ("lambda_qc_from_energy", cosmo.lambda_qc_from_energy(p), cosmo.lambda_qc_from_energy(q)),
    ]
    lam_p, lam_q = pairs[-1][1], pairs[-1][2]
    pairs.append(("pressure_shift", cosmo.pressure_shift(p, lam_p), cosmo.pressure_shift(q, lam_q)))
    for name, old, new in pairs:
        assert new == pytest.approx(old * factor(F[name][1]), rel=1e-12, abs=0)


def test_dimension_table_self_check(monkeypatch):
    units = cosmo.check_dimensions()
    assert units["lambda_qc_from_drho"] == "1/m^2" and units["alpha"] == "1"
    monkeypatch.setitem(cosmo.FORMULAS, "alpha", ("1/m", cosmo.ONE / cosmo.M))
    with pytest.raises(AssertionError):
        cosmo.check_dimensions()


@pytest.mark.parametrize("kw", [
    {"H0": 0.0}, {"H0": -1e-18}, {"M": 0.0}, {"Omega_m": 0.0}, {"Omega_m": 1.5},
    {"eps": 1e-10, "P": -2e-10}, {"K": 2},
])
def test_invalid_parameters_are_rejected(kw):
    with pytest.raises(ConfigurationError):
        cosmo.CosmologyParams(**kw)


def test_sweep_covers_every_combination():
    rows = cosmo.sweep([1.67e-27, 9.11e-31], [2.18e-18, 2.3e-18], [0.1, 0.3])
    assert len(rows) == 8
    assert all(r.route_rel_diff < 1e-14 for r in rows)
    light = [r for r in rows if r.M == 9.11e-31]
    heavy = [r for r in rows if r.M == 1.67e-27]
    assert all(lr.alpha > hr.alpha for lr, hr in zip(light, heavy))
    for r in rows:
        assert r.eps_plus_P == pytest.approx(cosmo.critical_energy_density(r.H0))
