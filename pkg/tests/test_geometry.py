import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvqhd import geometry as geo
from curvqhd.errors import ConfigurationError, DomainError, PoleError, RepresentabilityError


def charts_2d():
    return [
        geo.Chart.sphere2(1.0, 16, 32),
        geo.Chart.sphere2(2.0, 16, 32),
        geo.Chart.hyperbolic2(1.0, 2.0, 16, 32),
        geo.Chart.bump2(0.5, 0.5, 3.0, 16),
    ]


def interior_point(chart, u, v):
    (a0, b0), (a1, b1) = chart.bounds
    pad = 0.1 * (b0 - a0)
    return (a0 + pad + u * (b0 - a0 - 2 * pad), a1 + v * (b1 - a1))


# ----------------------------------------------------------------------
# point evaluators


def test_metric_examples():
    m = geo.metric_at(geo.Chart.sphere2(1.0), (math.pi / 2, 0.0))
    assert np.allclose(m.g, np.eye(2)) and m.sqrt_g == pytest.approx(1.0)
    m = geo.metric_at(geo.Chart.flat_line(), (0.3,))
    assert m.g.tolist() == [[1.0]] and m.sqrt_g == 1.0
    m = geo.metric_at(geo.Chart.hyperbolic2(1.0), (math.log(2), 0.0))
    assert m.g[1, 1] == pytest.approx(0.5625, rel=1e-14)


@pytest.mark.parametrize("chart", charts_2d(), ids=lambda c: c.kind)
def test_metric_inverse_and_volume(chart):
    m = geo.metric_at(chart, interior_point(chart, 0.4, 0.3))
    assert np.allclose(m.g @ m.g_inv, np.eye(2), atol=1e-12)
    assert m.sqrt_g == pytest.approx(math.sqrt(np.linalg.det(m.g)), rel=1e-14)


def test_christoffel_examples():
    assert not np.any(geo.christoffel(geo.Chart.flat_line(), (0.2,)).gamma)
    sph = geo.Chart.sphere2(1.0)
    assert geo.christoffel(sph, (math.pi / 2, 0.0)).gamma[0, 1, 1] == pytest.approx(0.0, abs=1e-16)
    G = geo.christoffel(sph, (math.pi / 3, 0.0)).gamma
    assert G[0, 1, 1] == pytest.approx(-0.4330127018922193, rel=1e-14)
    assert G[1, 0, 1] == pytest.approx(0.5773502691896258, rel=1e-14)
    assert G[1, 1, 0] == G[1, 0, 1]


@pytest.mark.parametrize("chart", charts_2d(), ids=lambda c: c.kind)
def test_christoffel_fd_matches_closed_form(chart):
    x = interior_point(chart, 0.35, 0.6)
    assert np.allclose(geo.christoffel_fd(chart, x).gamma, geo.christoffel(chart, x).gamma, atol=1e-7)


@pytest.mark.parametrize("chart", charts_2d(), ids=lambda c: c.kind)
def test_christoffel_fd_second_order(chart):
    x = interior_point(chart, 0.3, 0.2)
    exact = geo.christoffel(chart, x).gamma
    e1 = np.abs(geo.christoffel_fd(chart, x, h=2e-2).gamma - exact).max()
    e2 = np.abs(geo.christoffel_fd(chart, x, h=1e-2).gamma - exact).max()
    assert e1 / e2 == pytest.approx(4.0, abs=0.5)


def test_ricci_examples():
    for c in (geo.Chart.flat_line(), geo.Chart.circle(2.0)):
        r = geo.ricci_mixed(c, (0.5,))
        assert not np.any(r.mixed) and r.gamma == 0
    r = geo.ricci_mixed(geo.Chart.sphere2(2.0), (1.0, 2.0))
    assert np.allclose(r.mixed, 0.25 * np.eye(2))
    assert r.gamma == pytest.approx(0.125)  # sign convention: see RicciSample
    r = geo.ricci_mixed(geo.Chart.hyperbolic2(1.0), (0.7, 1.0))
    assert np.allclose(r.mixed, -np.eye(2))
    assert r.gamma == pytest.approx(-0.5)
    assert geo.ricci_mixed(geo.Chart.bump2(), (0.1, 0.2)).gamma is None


@pytest.mark.parametrize("chart", charts_2d(), ids=lambda c: c.kind)
def test_ricci_fd_matches_closed_form(chart):
    x = interior_point(chart, 0.45, 0.25)
    assert np.allclose(geo.ricci_fd(chart, x).mixed, geo.ricci_mixed(chart, x).mixed, atol=1e-5)


def test_ricci_fd_second_order_on_bump():
    chart = geo.Chart.bump2(0.5, 0.5)
    x = (0.2, -0.15)
    exact = geo.ricci_mixed(chart, x).mixed
    e1 = np.abs(geo.ricci_fd(chart, x, h=1e-2).mixed - exact).max()
    e2 = np.abs(geo.ricci_fd(chart, x, h=5e-3).mixed - exact).max()
    assert e1 / e2 == pytest.approx(4.0, abs=0.5)


def test_bump_curvature_against_conformal_formula():
    # K = -exp(-2 s) lap(s) for g = exp(2 s) delta; lap evaluated by dense differences of s
    chart = geo.Chart.bump2(0.5, 0.5)
    x, y, h = 0.31, -0.12, 1e-4

    def s(a, b):
        return 0.5 * math.exp(-(a * a + b * b) / 0.25)

    lap = (s(x + h, y) + s(x - h, y) + s(x, y + h) + s(x, y - h) - 4 * s(x, y)) / h ** 2
    K = -math.exp(-2 * s(x, y)) * lap
    assert geo.ricci_mixed(chart, (x, y)).mixed[0, 0] == pytest.approx(K, rel=1e-6)


def test_custom_chart_uses_fd_geometry():
    chart = geo.Chart.custom(lambda t, p: (np.ones_like(t), np.sin(t) ** 2), ((0, math.pi), (0, 2 * math.pi)),
                             ["pole", "periodic"], (16, 32))
    x = (1.1, 0.4)
    sph = geo.Chart.sphere2(1.0, 16, 32)
    assert np.allclose(geo.christoffel(chart, x).gamma, geo.christoffel(sph, x).gamma, atol=1e-7)
    assert np.allclose(geo.ricci_mixed(chart, x).mixed, np.eye(2), atol=1e-5)


def test_tetrad_examples():
    assert geo.tetrad_at(geo.Chart.flat_line(), (0.0,)).frame.tolist() == [[1.0]]
    t = geo.tetrad_at(geo.Chart.sphere2(1.0), (math.pi / 6, 0.0))
    assert np.allclose(t.frame, np.diag([1.0, 2.0]), rtol=1e-14)
    assert np.allclose(t.coframe @ t.frame, np.eye(2))


@settings(max_examples=60, deadline=None)
@given(k=st.integers(0, 3), u=st.floats(0.0, 1.0), v=st.floats(0.0, 1.0))
def test_tetrad_orthonormal_and_christoffel_symmetric(k, u, v):
    chart = charts_2d()[k]
    x = interior_point(chart, u, v)
    m = geo.metric_at(chart, x)
    e = geo.tetrad_at(chart, x).frame
    assert np.abs(e.T @ m.g @ e - np.eye(2)).max() < 1e-12
    G = geo.christoffel(chart, x).gamma
    assert np.array_equal(G, np.swapaxes(G, 1, 2))


def test_domain_and_pole_errors():
    sph = geo.Chart.sphere2(1.0, 16, 32)
    with pytest.raises(PoleError):
        geo.metric_at(sph, (0.01, 0.0))
    with pytest.raises(DomainError):
        geo.metric_at(sph, (4.0, 0.0))
    with pytest.raises(DomainError):
        geo.metric_at(geo.Chart.flat_line(-1, 1, topology="reflective"), (1.5,))
    # periodic axes wrap instead of failing
    assert geo.metric_at(geo.Chart.circle(1.0), (10.0,)).sqrt_g == pytest.approx(1.0)
    with pytest.raises(ConfigurationError):
        geo.laplace_beltrami(geo.Chart.flat_line(cells=3), np.ones(3))
    with pytest.raises(RepresentabilityError):
        geo.chart_gamma(geo.Chart.bump2())


def test_chart_validation():
    with pytest.raises(ConfigurationError):
        geo.Chart("torus", ((0, 1),), (("periodic", "periodic"),), (8,))
    with pytest.raises(ConfigurationError):
        geo.Chart.sphere2(1.0, 16, 31)  # antipodal ghosts need an even phi grid
    with pytest.raises(ConfigurationError):
        geo.Chart.sphere2(-1.0)


# ----------------------------------------------------------------------
# grid operators


def test_laplacian_of_constant_is_zero():
    for chart in charts_2d() + [geo.Chart.circle(1.0, 32), geo.Chart.flat_line(-1, 1, 32, "reflective")]:
        assert np.abs(geo.laplace_beltrami(chart, np.full(chart.cells, 3.0))).max() < 1e-11


def test_circle_laplacian_of_sine():
    errs = []
    for n in (32, 64):
        c = geo.Chart.circle(1.0, n)
        x = c.coords[0]
        errs.append(np.abs(geo.laplace_beltrami(c, np.sin(x)) + np.sin(x)).max())
    assert errs[0] < 4e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.1)


def test_sphere_laplacian_l1_max_norm_second_order():
    errs = []
    for n in (16, 32, 64):
        c = geo.Chart.sphere2(1.0, n, 2 * n)
        f = np.cos(c.coords[0])
        errs.append(np.abs(geo.laplace_beltrami(c, f) + 2 * f).max())
    assert errs[-1] < 2e-3
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.5)


@pytest.mark.parametrize("ell,field", [
    (2, lambda t, p: np.sin(t) * np.cos(t) * np.cos(p)),
    (2, lambda t, p: np.sin(t) ** 2 * np.sin(2 * p)),
    (3, lambda t, p: np.sin(t) * (5 * np.cos(t) ** 2 - 1) * np.cos(p)),
])
def test_sphere_harmonic_eigenvalues_l2_second_order(ell, field):
    a = 1.5
    errs = []
    for n in (16, 32, 64):
        c = geo.Chart.sphere2(a, n, 2 * n)
        f = field(*c.coords)
        err = geo.laplace_beltrami(c, f) + ell * (ell + 1) / a ** 2 * f
        errs.append(geo.l2_norm(c, err) / geo.l2_norm(c, f))
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.5)


def test_hyperbolic_laplacian_of_cosh():
    # cosh(chi) is the ambient time coordinate of the hyperboloid: lap = 2 cosh / a^2
    errs = []
    for n in (16, 32, 64):
        c = geo.Chart.hyperbolic2(1.0, 2.0, n, 16)
        f = np.cosh(c.coords[0])
        err = (geo.laplace_beltrami(c, f) - 2 * f)[c.coords[0] < 1.5]
        errs.append(np.abs(err).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.5)


def test_open_boundary_row_is_first_order():
    edge = []
    for n in (32, 64, 128):
        c = geo.Chart.hyperbolic2(1.0, 2.0, n, 16)
        f = np.cosh(c.coords[0])
        edge.append(np.abs(geo.laplace_beltrami(c, f) - 2 * f)[-1].max())
    assert edge[0] / edge[1] == pytest.approx(2.0, abs=0.3)
    assert edge[1] / edge[2] == pytest.approx(2.0, abs=0.3)


def test_bump_laplacian_is_conformally_scaled():
    errs = []
    for n in (32, 64, 128):
        c = geo.Chart.bump2(0.5, 0.5, 3.0, n)
        x, y = c.coords
        k = math.pi / 3
        f = np.cos(k * x) * np.sin(k * y)
        exact = -np.exp(-2 * 0.5 * np.exp(-(x ** 2 + y ** 2) / 0.25)) * 2 * k ** 2 * f
        errs.append(np.abs(geo.laplace_beltrami(c, f) - exact).max())
    assert errs[0] / errs[1] == pytest.approx(4.0, abs=0.5)
    assert errs[1] / errs[2] == pytest.approx(4.0, abs=0.5)


@pytest.mark.parametrize("chart", charts_2d()[:2] + [charts_2d()[3], geo.Chart.circle(2.0, 24)],
                         ids=lambda c: c.kind)
def test_divergence_is_conservative_on_closed_charts(chart):
    rng = np.random.default_rng(4)
    V = rng.normal(size=(chart.dim,) + chart.cells)
    assert abs(geo.integrate(chart, geo.divergence(chart, V))) < 1e-12 * geo.integrate(chart, np.abs(V).sum(0))


def test_laplacian_is_self_adjoint_on_sphere():
    c = geo.Chart.sphere2(1.0, 12, 24)
    rng = np.random.default_rng(0)
    f, g = rng.normal(size=(2,) + c.cells)
    lhs = geo.integrate(c, f * geo.laplace_beltrami(c, g))
    rhs = geo.integrate(c, g * geo.laplace_beltrami(c, f))
    assert lhs == pytest.approx(rhs, rel=1e-11)


@pytest.mark.parametrize("chart", charts_2d() + [geo.Chart.flat_line(-2, 2, 16, "open")], ids=lambda c: c.kind)
def test_sparse_laplacian_matches_operator(chart):
    f = np.random.default_rng(1).normal(size=chart.cells)
    L = geo.laplace_beltrami_matrix(chart)
    assert np.allclose((L @ f.ravel()).reshape(chart.cells), geo.laplace_beltrami(chart, f), atol=1e-10)


def test_gradient_and_hessian_of_quadratic_on_flat_line():
    c = geo.Chart.flat_line(-1, 1, 40, "open")
    x = c.coords[0]
    assert np.allclose(geo.gradient(c, x ** 2)[0], 2 * x, atol=1e-12)
    assert np.allclose(geo.hessian(c, x ** 2)[0, 0], 2.0, atol=1e-10)


def test_hessian_covariant_on_sphere():
    # f = cos(theta): nabla_t d_t f = -cos, nabla_p d_p f = -Gamma^t_pp d_t f = -sin^2 cos
    c = geo.Chart.sphere2(1.0, 64, 16)
    t = c.coords[0]
    H = geo.hessian(c, np.cos(t))
    inner = slice(2, -2)
    assert np.abs(H[0, 0] + np.cos(t))[inner].max() < 2e-3
    assert np.abs(H[1, 1] + np.sin(t) ** 2 * np.cos(t))[inner].max() < 2e-3
    assert np.abs(H[0, 1]).max() < 1e-12


def test_tetrad_grid_orthonormal():
    for chart in charts_2d():
        e = geo.tetrad_grid(chart)
        G = np.einsum("i...,ia...,ib...->ab...", chart.g, e, e)
        assert np.abs(G - np.eye(2)[:, :, None, None]).max() < 1e-12
