import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsler_angle import tensor_core as tc
from finsler_angle.finsleroid import covector

from conftest import X0, Y0

vec3 = st.lists(st.floats(-2, 2), min_size=3, max_size=3).map(np.array)


def test_quadratic_form_hessian_is_twice_identity():
    H = tc.differentiate_y(lambda x, y: (y * y).sum(), None, np.array([0.3, -1.0, 2.0]), 2)
    np.testing.assert_allclose(H, 2 * np.eye(3), atol=1e-14)


def test_constant_has_zero_gradient():
    d = tc.differentiate_y(lambda x, y: 4.2, None, np.ones(3), 1)
    assert np.all(d == 0.0)


def test_fourth_order_is_exact_on_polynomials():
    # y0^2 y1 y2 has exactly one nonzero fourth derivative family: d0 d0 d1 d2 = 2
    D = tc.differentiate_y(lambda x, y: y[0] * y[0] * y[1] * y[2], None, np.array([0.7, -0.3, 1.1]), 4)
    assert D[0, 0, 1, 2] == pytest.approx(2.0, abs=1e-13)
    assert D[1, 2, 0, 0] == pytest.approx(2.0, abs=1e-13)
    assert abs(D[0, 0, 0, 0]) < 1e-13 and abs(D[1, 1, 2, 2]) < 1e-13


def test_order_out_of_range():
    with pytest.raises(ValueError):
        tc.differentiate_y(lambda x, y: y[0], None, np.ones(3), 5)


def test_non_finite_is_reported():
    with pytest.raises(tc.NonFinite):
        tc.differentiate_y(lambda x, y: tc.sqrt(y[0]), None, np.array([-1.0, 0.0, 0.0]), 1)


def test_finsleroid_energy_gradient_matches_closed_covector(flat3, curv3):
    for space in (flat3, curv3):
        grad = tc.differentiate_y(lambda x, y: 0.5 * space.metric(x, y) ** 2, X0, Y0, 1)
        np.testing.assert_allclose(grad, covector(space, X0, Y0), atol=1e-10)


def test_fd_gradient_simple_cases():
    np.testing.assert_allclose(tc.fd_gradient_x(lambda x: x[0] * x[1], np.array([2.0, 3.0, 5.0])),
                               [3.0, 2.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(tc.fd_gradient_x(lambda x: 7.0, np.ones(3)), 0.0, atol=1e-14)
    with pytest.raises(ValueError):
        tc.fd_gradient_x(lambda x: x[0], np.ones(3), step=0.0)


def test_fd_gradient_of_conformal_metric(curv3):
    # d_k a_mn = 0.2 exp(0.2 x^1) delta_mn delta_k1
    da = tc.fd_gradient_x(lambda x: curv3.field.a(x), X0)
    exact = np.zeros((3, 3, 3))
    exact[:, :, 0] = 0.2 * np.exp(0.2 * X0[0]) * np.eye(3)
    np.testing.assert_allclose(da, exact, atol=1e-9)


def test_invert():
    np.testing.assert_array_equal(tc.invert(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(tc.invert(np.diag([2.0, 4.0, 5.0])), np.diag([0.5, 0.25, 0.2]))
    with pytest.raises(np.linalg.LinAlgError):
        tc.invert(np.ones((3, 3)))


def test_jet_inverse_matches_numpy_derivative():
    b = tc.basis(1, 3)
    s = b.seed(np.array([0.4]))
    m = np.array([[2.0, 0.1], [0.3, 1.0]]) + s[0] * np.array([[0.5, 0.0], [0.2, -0.7]])
    minv = tc.inv(m)
    h = 1e-6
    A = lambda t: np.array([[2.0, 0.1], [0.3, 1.0]]) + t * np.array([[0.5, 0.0], [0.2, -0.7]])
    fd = (np.linalg.inv(A(0.4 + h)) - np.linalg.inv(A(0.4 - h))) / (2 * h)
    np.testing.assert_allclose(minv.partial(0), fd, atol=1e-8)


def test_symmetrize_and_trace():
    rng = np.random.default_rng(0)
    t = rng.normal(size=(3, 3))
    s = tc.symmetrize(t)
    assert np.abs(s - s.T).max() < 1e-12
    a = tc.antisymmetrize(t)
    assert np.abs(a + a.T).max() < 1e-12
    assert np.einsum("ij,ij->", t, np.eye(3)) == pytest.approx(np.trace(t))


@settings(max_examples=25, deadline=None)
@given(vec3, st.floats(-3, 3), st.floats(-3, 3))
def test_derivative_is_linear(y, alpha, beta):
    f = lambda x, v: tc.exp(0.3 * v[0]) * v[1] + v[2] ** 3
    g = lambda x, v: tc.sqrt(1.0 + (v * v).sum())
    lhs = tc.differentiate_y(lambda x, v: alpha * f(x, v) + beta * g(x, v), None, y, 2)
    rhs = alpha * tc.differentiate_y(f, None, y, 2) + beta * tc.differentiate_y(g, None, y, 2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


@settings(max_examples=25, deadline=None)
@given(vec3)
def test_jet_agrees_with_divided_differences(y):
    f = lambda x, v: tc.arctan(v[0] * v[1]) + tc.exp(-(v * v).sum())
    jet = tc.differentiate_y(f, None, y, 1)
    h = 1e-5
    fd = [(f(None, y + h * e) - f(None, y - h * e)) / (2 * h) for e in np.eye(3)]
    np.testing.assert_allclose(jet, fd, atol=1e-8)


def test_order_zero_projection_equals_plain_evaluation():
    f = lambda v: tc.atan2(v[1], v[0]) * tc.log(1.0 + v[2] ** 2)
    y = np.array([0.4, 0.9, -1.3])
    assert float(tc.value(f(tc.basis(3, 4).seed(y)))) == pytest.approx(float(f(y)), abs=1e-15)
