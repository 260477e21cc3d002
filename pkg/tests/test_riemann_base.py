import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsler_angle import riemann_base as rb
from finsler_angle import tensor_core as tc
from finsler_angle.fixtures import curved_field, flat_field, levi_civita_torsion, conformal_metric, sphere_field
from finsler_angle.riemann_base import RiemannField

from conftest import X0

points = st.lists(st.floats(-0.5, 0.5), min_size=3, max_size=3).map(np.array)


def test_conformal_christoffels_closed_form():
    # a = exp(2 phi) delta, phi = x^1 / 10: Gamma^k_ij = phi_i d_jk + phi_j d_ik - phi_k d_ij
    gam = rb.christoffel(curved_field(), X0)
    phi = np.array([0.1, 0.0, 0.0])
    d = np.eye(3)
    exact = (np.einsum("i,jk->kij", phi, d) + np.einsum("j,ik->kij", phi, d)
             - np.einsum("k,ij->kij", phi, d))
    np.testing.assert_allclose(gam, exact, atol=1e-14)


def test_conformal_sectional_curvatures():
    # symbolic values: K(1,2) = K(1,3) = 0, K(2,3) = -exp(-x^1/5)/100
    f = curved_field()
    assert rb.sectional_curvature(f, X0, 0, 1) == pytest.approx(0.0, abs=1e-14)
    assert rb.sectional_curvature(f, X0, 0, 2) == pytest.approx(0.0, abs=1e-14)
    assert rb.sectional_curvature(f, X0, 1, 2) == pytest.approx(-0.0098019867330675530, abs=1e-13)


@settings(max_examples=15, deadline=None)
@given(points)
def test_round_metric_has_unit_curvature(x):
    f = sphere_field()
    for i, j in ((0, 1), (0, 2), (1, 2)):
        assert rb.sectional_curvature(f, x, i, j) == pytest.approx(1.0, abs=1e-11)


@settings(max_examples=10, deadline=None)
@given(points)
def test_riemann_symmetries(x):
    r = rb.riemann_curvature(curved_field(), x)
    assert np.abs(r + r.transpose(0, 1, 3, 2)).max() < 1e-13
    # first Bianchi identity R^k_{hij} + R^k_{ijh} + R^k_{jhi} = 0
    bianchi = r + r.transpose(0, 2, 3, 1) + r.transpose(0, 3, 1, 2)
    assert np.abs(bianchi).max() < 1e-13


def test_flat_base_is_flat():
    assert np.abs(rb.riemann_curvature(flat_field(), X0)).max() == 0.0
    assert np.abs(rb.christoffel(flat_field(), X0)).max() == 0.0


def test_metric_derivative_matches_finite_differences():
    f = curved_field()
    fd = tc.fd_gradient_x(lambda x: f.a(x), X0)
    np.testing.assert_allclose(rb.metric_derivative(f, X0), fd, atol=1e-9)


def test_axis_has_unit_length():
    f = curved_field()
    a = f.a(X0)
    b = f.b(X0)
    assert b @ np.linalg.inv(a) @ b == pytest.approx(1.0, abs=1e-14)


def test_torsion_enters_linear_connection():
    m = conformal_metric(3)
    f = RiemannField(3, m, lambda x: m(x)[:, 0], torsion=levi_civita_torsion(m, 3, 0.1))
    L = rb.linear_connection(f, X0)
    np.testing.assert_allclose(L - rb.christoffel(f, X0), f.S(X0), atol=1e-14)


def test_h_scalar_gradient():
    hs = rb.h_scalar(curved_field(), X0)
    g = 0.4 + 0.2 * X0[1]
    assert hs.H == pytest.approx(np.sqrt(1 - g * g / 4), abs=1e-15)
    np.testing.assert_allclose(hs.H_i, [0.0, -0.2 * g / (4 * hs.H), 0.0], atol=1e-15)


def test_riemann_angle_and_norm():
    f = flat_field()
    assert rb.riemann_norm(f, X0, np.array([3.0, 4.0, 0.0])) == pytest.approx(5.0)
    assert rb.riemann_angle(f, X0, np.array([1.0, 0, 0]), np.array([0, 2.0, 0])) == pytest.approx(np.pi / 2)
    with pytest.raises(ValueError):
        rb.riemann_angle(f, X0, np.zeros(3), np.ones(3))


def test_parallel_transport_preserves_inner_products():
    f = sphere_field()
    curve = lambda s: (np.array([0.3 * np.cos(s), 0.3 * np.sin(s), 0.1 * s]),
                       np.array([-0.3 * np.sin(s), 0.3 * np.cos(s), 0.1]))
    u = rb.parallel_transport(f, curve, [1.0, 0.2, 0.0], steps=200)
    v = rb.parallel_transport(f, curve, [0.0, 1.0, -0.5], steps=200)
    a0, a1 = f.a(u[0][1]), f.a(u[-1][1])
    assert u[-1][2] @ a1 @ v[-1][2] == pytest.approx(u[0][2] @ a0 @ v[0][2], abs=1e-9)
    assert u[-1][2] @ a1 @ u[-1][2] == pytest.approx(u[0][2] @ a0 @ u[0][2], abs=1e-9)


def test_nabla_of_metric_vanishes():
    f = curved_field()
    out = rb.nabla(f, X0, lambda x, t: f.a(x), np.ones(3), "ll")
    assert np.abs(out).max() < 1e-13
