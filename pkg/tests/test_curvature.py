import numpy as np
import pytest

from finsler_angle import curvature as cv
from finsler_angle import fixture, riemann_base as rb
from finsler_angle.connection import Frame

from conftest import X0, Y0


@pytest.fixture(scope="module")
def frames(curv3, curv3_points):
    return [Frame(curv3, x, y) for x, y in curv3_points[:2]]


def test_commutator_routes_match_closed_form(frames):
    for f in frames:
        r = cv.route_agreement(f)
        assert r["fd_commutator"] <= 1e-5
        assert r["jet_commutator"] <= 1e-9
        assert r["E_raw"] <= 1e-9


def test_contractions(frames):
    for f in frames:
        res = cv.contraction_residuals(f)
        assert max(res.values()) <= 1e-8, res


def test_squared_norms(frames):
    for f in frames:
        res = cv.norm_identities(f)
        assert max(res.values()) <= 1e-5, res


def test_derivative_identity(frames):
    for f in frames:
        res = cv.curvature_derivative_check(f)
        assert max(res.values()) <= 1e-4, res


def test_commutator_law(frames):
    for f in frames:
        assert cv.commutator_law(f) <= 1e-8


def test_curvature_is_not_trivially_zero(frames):
    b = cv.curvature_bundle(frames[0])
    assert np.abs(b.M).max() > 1e-4
    assert np.abs(b.rho).max() > 1e-3
    assert b.a_sq > 0


def test_flat_base_has_no_curvature(flat3, flat3_points):
    for x, y in flat3_points:
        b = cv.curvature_bundle(Frame(flat3, x, y))
        assert max(np.abs(b.M).max(), np.abs(b.E).max(), np.abs(b.rho).max()) <= 1e-10


def test_riemannian_limit():
    space = fixture("RIEM-CURV")
    R = rb.riemann_curvature(space.field, X0)
    np.testing.assert_allclose(cv.m_tensor(space, X0, Y0), -np.einsum("h,hnij->nij", Y0, R), atol=1e-13)
    np.testing.assert_allclose(cv.rho_tensor(space, X0, Y0), R, atol=1e-13)


def test_m_tensor_routes(curv3):
    closed = cv.m_tensor(curv3, X0, Y0)
    np.testing.assert_allclose(cv.m_tensor(curv3, X0, Y0, "jet"), closed, atol=1e-10)
    np.testing.assert_allclose(cv.m_tensor(curv3, X0, Y0, "commutator"), closed, atol=1e-6)
    with pytest.raises(ValueError):
        cv.m_tensor(curv3, X0, Y0, "spectral")


def test_m_is_skew_in_directions(curv3):
    M = cv.m_tensor(curv3, X0, Y0)
    assert np.abs(M + M.transpose(0, 2, 1)).max() < 1e-14
