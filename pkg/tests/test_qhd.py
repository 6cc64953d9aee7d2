import math

import numpy as np
import pytest

from curvqhd import geometry as geo
from curvqhd import qhd
from curvqhd.errors import CFLError, ConfigurationError, PositivityError


def at_rest(chart, rho, **kw):
    return qhd.FluidState(chart, rho, np.zeros((chart.dim,) + chart.cells), **kw)


def sphere_bump(chart, beta=0.5):
    return np.exp(beta * np.cos(chart.coords[0]))


def test_uniform_state_is_a_fixed_point():
    for chart in (geo.Chart.sphere2(1.0, 16, 32), geo.Chart.circle(1.0, 32), geo.Chart.hyperbolic2(1.0, 1.5, 12, 16)):
        s = at_rest(chart, np.full(chart.cells, 0.7))
        out = qhd.step_fluid(s, dt=1e-3)
        assert np.abs(out.rho - 0.7).max() < 1e-14
        assert np.abs(out.v).max() < 1e-12


def test_quantum_force_of_gaussian_converges():
    sigma = 0.9
    errs = []
    for n in (64, 128, 256):
        c = geo.Chart.flat_line(-4, 4, n, "open")
        x = c.coords[0]
        F = qhd.quantum_force(np.exp(-x ** 2 / (2 * sigma ** 2)), c)
        inner = np.abs(x) < 3
        errs.append(np.abs(F[0] - x / (4 * sigma ** 4))[inner].max())
    # the log-density is quadratic, so the centred differences are exact
    assert max(errs) < 1e-9


def test_quantum_force_scales_with_hbar_over_mass():
    c = geo.Chart.circle(1.0, 64)
    rho = 1 + 0.3 * np.sin(c.coords[0])
    F1 = qhd.quantum_force(rho, c)
    assert np.allclose(qhd.quantum_force(rho, c, hbar=2.0, mass=0.5), 16 * F1)


def _sphere_Q(theta, eps=0.1):
    # Q = lap(u)/u for the axisymmetric u = sqrt(1 + eps cos theta)
    u = np.sqrt(1 + eps * np.cos(theta))
    du = -0.5 * eps * np.sin(theta) / u
    d2u = -0.5 * eps * np.cos(theta) / u - 0.25 * eps ** 2 * np.sin(theta) ** 2 / u ** 3
    return (d2u + du / np.tan(theta)) / u


def test_sphere_quantum_force_against_closed_form():
    errs = []
    for n in (16, 32, 64):
        c = geo.Chart.sphere2(1.0, n, 8)
        t = c.coords[0]
        F = qhd.quantum_force(1 + 0.1 * np.cos(t), c)
        k = 1e-5
        exact = 0.5 * (_sphere_Q(t + k) - _sphere_Q(t - k)) / (2 * k)
        errs.append(np.abs(F[0] - exact).max())
        assert np.abs(F[1]).max() < 1e-14
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.6)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.6)


def test_qc_force_examples():
    flat = geo.Chart.flat_line(-3, 3, 32, "open")
    assert not np.any(qhd.qc_force(np.exp(-flat.coords[0] ** 2), flat))
    sph = geo.Chart.sphere2(1.0, 32, 64)
    assert not np.any(qhd.qc_force(np.full(sph.cells, 2.0), sph))
    t = sph.coords[0]
    F = qhd.qc_force(sphere_bump(sph), sph)
    # sphere-positive Ricci: +1/4 * 1 * d(0.5 cos)/dtheta
    assert np.abs(F[0] + 0.125 * np.sin(t)).max() < 2e-3
    assert np.abs(F[1]).max() < 1e-15
    hyp = geo.Chart.hyperbolic2(1.0, 2.0, 32, 16)
    chi = hyp.coords[0]
    F = qhd.qc_force(np.exp(-chi ** 2), hyp, hbar=2.0)
    assert np.abs(F[0] - 2 * chi)[chi < 1.8].max() < 1e-10


def test_stress_tensor_of_gaussian_at_rest():
    sigma = 0.8
    c = geo.Chart.flat_line(-4, 4, 128, "open")
    x = c.coords[0]
    rho = np.exp(-x ** 2 / (2 * sigma ** 2))
    T = qhd.stress_tensor(at_rest(c, rho))
    assert np.allclose(T.total[0, 0], rho / (4 * sigma ** 2), rtol=1e-9, atol=0)
    assert not np.any(T.kinetic) and not np.any(T.pressure)
    T2 = qhd.stress_tensor(at_rest(c, rho, hbar=3.0, mass=1.5))
    assert np.allclose(T2.quantum, 4 * T.quantum)


def test_stress_tensor_is_symmetric():
    c = geo.Chart.sphere2(1.0, 16, 32)
    rng = np.random.default_rng(3)
    rho = np.exp(0.3 * rng.normal(size=c.cells))
    s = qhd.FluidState(c, rho, rng.normal(size=(2,) + c.cells), eos=qhd.Eos("polytrope", 0.5, 2.0))
    T = qhd.stress_tensor(s).total
    assert np.abs(T[0, 1] - T[1, 0]).max() <= 1e-14 * np.abs(T).max()


def test_mass_conserved_on_closed_charts():
    for chart in (geo.Chart.sphere2(1.0, 16, 32), geo.Chart.bump2(0.5, 0.5, 3.0, 24)):
        rng = np.random.default_rng(0)
        s = qhd.FluidState(chart, 1 + 0.2 * rng.random(chart.cells), 0.1 * rng.normal(size=(2,) + chart.cells))
        m0 = s.total_mass
        dt = 0.5 * qhd.stable_dt(s)
        for _ in range(30):
            s = qhd.step_fluid(s, dt=dt)
        assert abs(s.total_mass - m0) / m0 < 1e-10


def test_flat_space_ignores_qc_switch_bitwise():
    c = geo.Chart.flat_line(-5, 5, 64, "periodic")
    x = c.coords[0]
    s = qhd.FluidState(c, np.exp(-x ** 2), 0.1 * np.sin(np.pi * x / 5)[None])
    a = qhd.evolve(s, 2e-3, 20, qc=True)[-1]
    b = qhd.evolve(s, 2e-3, 20, qc=False)[-1]
    assert np.array_equal(a.rho, b.rho) and np.array_equal(a.v, b.v)


def test_quantum_force_is_curl_free_on_flat_torus():
    c = geo.Chart.custom(lambda x, y: (np.ones_like(x), np.ones_like(x)), ((0, 2 * np.pi), (0, 2 * np.pi)),
                         ["periodic", "periodic"], (32, 32))
    x, y = c.coords
    F = qhd.quantum_force(np.exp(0.4 * np.sin(x) * np.cos(2 * y)), c)
    curl = geo.partial(c, F[1], 0) - geo.partial(c, F[0], 1)
    assert np.abs(curl).max() < 1e-12 * np.abs(F).max()


def test_forward_then_backward_step_is_high_order():
    c = geo.Chart.sphere2(1.0, 16, 32)
    s = qhd.FluidState(c, sphere_bump(c), 0.05 * np.stack([np.sin(c.coords[1]), np.zeros(c.cells)]))
    errs = []
    for frac in (0.8, 0.4, 0.2):
        dt = frac * qhd.stable_dt(s)
        back = qhd.step_fluid(qhd.step_fluid(s, dt=dt), dt=-dt)
        errs.append(np.abs(back.rho - s.rho).max() + np.abs(back.v - s.v).max())
    assert errs[0] / errs[1] > 7 and errs[1] / errs[2] > 7


def _mms(n, T=0.5, kappa=0.4, index=2.0):
    # manufactured travelling wave for a polytrope with hbar = 0 on the unit circle
    c = geo.Chart.circle(1.0, n)
    x = c.coords[0]

    def exact(t):
        return 1 + 0.2 * np.sin(x - t), 0.5 + 0.1 * np.cos(x - t)

    def source(t):
        r, v = exact(t)
        rt, vt = -0.2 * np.cos(x - t), 0.1 * np.sin(x - t)
        rx, vx = 0.2 * np.cos(x - t), -0.1 * np.sin(x - t)
        s_rho = rt + rx * v + r * vx
        s_v = vt + v * vx + kappa * index * (index - 1) * r ** (index - 2) * rx
        return s_rho, s_v[None]

    eos = qhd.Eos("polytrope", kappa, index)
    r0, v0 = exact(0.0)
    s = qhd.FluidState(c, r0, v0[None], eos=eos, hbar=0.0)
    steps = int(round(T / (0.25 * c.spacing[0])))
    dt = T / steps
    for _ in range(steps):
        s = qhd.step_fluid(s, dt=dt, source=source)
    r, v = exact(T)
    return np.abs(s.rho - r).max() + np.abs(s.v[0] - v).max()


def test_manufactured_polytrope_second_order():
    e = [_mms(n) for n in (32, 64, 128)]
    assert e[0] / e[1] == pytest.approx(4.0, abs=0.6)
    assert e[1] / e[2] == pytest.approx(4.0, abs=0.6)


def test_cfl_violation_reports_stable_step():
    c = geo.Chart.sphere2(1.0, 16, 32)
    s = at_rest(c, sphere_bump(c))
    limit = qhd.stable_dt(s)
    with pytest.raises(CFLError) as info:
        qhd.step_fluid(s, dt=2 * limit)
    assert info.value.suggested_dt == pytest.approx(limit)
    qhd.step_fluid(s, dt=0.99 * limit)


def test_stable_dt_uses_only_varying_axes():
    c = geo.Chart.sphere2(1.0, 16, 64)
    axisym = at_rest(c, sphere_bump(c))
    assert qhd.active_axes(axisym) == [0]
    assert qhd.stable_dt(axisym) > qhd.stable_dt(at_rest(c, sphere_bump(c) + 0.01 * np.sin(c.coords[1])))
    assert qhd.stable_dt(at_rest(c, np.ones(c.cells))) == np.inf


def test_positivity_errors():
    c = geo.Chart.circle(1.0, 16)
    rho = np.cos(c.coords[0])
    with pytest.raises(PositivityError):
        qhd.quantum_force(rho, c)
    with pytest.raises(PositivityError):
        qhd.step_fluid(qhd.FluidState(c, np.full(16, 1e-3), np.sin(c.coords[0])[None] * 50), dt=0.1,
                       check_cfl=False)
    with pytest.raises(ConfigurationError):
        qhd.FluidState(c, np.ones(8), np.zeros((1, 16)))
    with pytest.raises(ConfigurationError):
        qhd.Eos("stiff")


def test_momentum_balance_needs_qc_force_on_sphere():
    c = geo.Chart.sphere2(1.0, 24, 48)
    s = at_rest(c, sphere_bump(c))
    dt = 0.5 * qhd.stable_dt(s)
    on = qhd.momentum_balance_residual(qhd.evolve(s, dt, 6, qc=True))
    off = qhd.momentum_balance_residual(qhd.evolve(s, dt, 6, qc=False))
    assert off > 10 * on
    with pytest.raises(ConfigurationError):
        qhd.momentum_balance([s, s])


def test_momentum_balance_with_potential_on_circle():
    c = geo.Chart.circle(1.0, 128)
    x = c.coords[0]
    V = 0.3 * np.cos(x)
    s = at_rest(c, 1 + 0.1 * np.sin(x))
    dt = 0.5 * qhd.stable_dt(s)
    run = qhd.evolve(s, dt, 4, V=V)
    assert qhd.momentum_balance_residual(run, V) < 1e-4
    assert qhd.momentum_balance_residual(run) > 1e-2


def test_eos_relations():
    eos = qhd.Eos("polytrope", 0.3, 5 / 3)
    rho = np.linspace(0.5, 2, 7)
    h = 1e-6
    deps = (eos.energy(rho + h) - eos.energy(rho - h)) / (2 * h)
    assert np.allclose(eos.pressure(rho), rho * deps - eos.energy(rho), rtol=1e-8)
    dP = (eos.pressure(rho + h) - eos.pressure(rho - h)) / (2 * h)
    assert np.allclose(eos.sound_speed(rho) ** 2, dP, rtol=1e-8)
    assert not np.any(qhd.DUST.pressure(rho))
