import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsler_angle import sample, sample_points
from finsler_angle import finsleroid as fr
from finsler_angle.connection import Frame, n_coefficients
from finsler_angle.finsleroid import FinsleroidSpace
from finsler_angle.fixtures import flat_field, curved_field

from conftest import X0, Y0

CHARGE_KEYS = {"cartan_g", "energy_g"}
CLOSED_FORM_KEYS = ["mbar_y", "cartan_g", "energy_g", "breve_contracted", "breve_contracted_jet",
                 "breve_first", "breve_second", "cartan_y", "cartan_rep"]


@pytest.fixture(scope="module")
def closed_forms(curv3, curv3_points):
    return [fr.closed_form_residuals(curv3, x, y, sample(curv3, x, y)) for x, y in curv3_points]


@pytest.mark.parametrize("key", CLOSED_FORM_KEYS)
def test_closed_form_identity(closed_forms, key):
    tol = 1e-5 if key in CHARGE_KEYS else 1e-6
    assert max(r[key] for r in closed_forms) <= tol


def test_frame_identities(curv3, curv3_points):
    for x, y in curv3_points[:2]:
        res = fr.frame_residuals(Frame(curv3, x, y))
        assert res["D_h"] <= 1e-6
        assert res["third_N"] <= 1e-6


def test_zero_charge_is_riemannian():
    space = FinsleroidSpace(flat_field(charge=0.0))
    fs = sample(space, X0, Y0)
    assert fs.F == pytest.approx(np.linalg.norm(Y0), abs=1e-15)
    assert np.abs(fs.C).max() < 1e-13
    np.testing.assert_allclose(fs.g, np.eye(3), atol=1e-14)


def test_h_values(flat3, curv3):
    assert float(flat3.H(X0)) == pytest.approx(0.916515138991168, abs=1e-15)
    assert float(curv3.H(X0)) == pytest.approx(0.983666610188635, abs=1e-15)


def test_unit_field_has_unit_base_length(curv3, curv3_points):
    for x, y in curv3_points:
        U = fr.u_field(curv3, x, y)
        a = curv3.field.a(x)
        assert U @ a @ U == pytest.approx(1.0, abs=1e-14)


def test_cartan_contraction_is_trace_of_cartan(curv3, curv3_points):
    for x, y in curv3_points:
        fs = sample(curv3, x, y)
        cc = fr.cartan_contraction(curv3, x, y)
        np.testing.assert_allclose(cc.A_low, fs.F * np.einsum("ijk,jk->i", fs.C, fs.ginv), atol=1e-12)
        # m is unit and orthogonal to l in the Finsler metric
        assert cc.m_low @ cc.m_up == pytest.approx(1.0, abs=1e-12)
        assert abs(cc.m_low @ fs.l_up) < 1e-12


def test_explicit_connection_agrees_with_generic(curv3, flat3):
    for space in (curv3, flat3):
        ex = fr.explicit_connection(space, X0, Y0)
        np.testing.assert_allclose(ex.N, n_coefficients(space, X0, Y0), atol=1e-12)


def test_explicit_connection_has_no_breve_part_for_constant_charge(flat3):
    ex = fr.explicit_connection(flat3, X0, Y0)
    assert np.abs(ex.g_i).max() == 0.0
    np.testing.assert_allclose(ex.N, ex.N_I)


def test_inadmissible_axis(flat3):
    with pytest.raises(fr.Inadmissible):
        fr.u_field(flat3, X0, np.array([2.0, 0.0, 0.0]))
    assert not flat3.admissible(X0, np.array([-1.0, 0.0, 0.0]))


def test_charge_outside_range_is_inadmissible():
    space = FinsleroidSpace(flat_field(charge=2.5))
    assert not space.admissible(X0, Y0)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1.9, 1.9))
def test_indicatrix_curvature_follows_charge(g):
    from finsler_angle.finsler_core import indicatrix_curvature

    space = FinsleroidSpace(flat_field(charge=g))
    ic = indicatrix_curvature(sample(space, X0, Y0))
    assert ic.c_ind == pytest.approx(1 - g * g / 4, abs=1e-8)


def test_charge_derivative_of_energy_matches_mbar(curv3):
    # dK^2/dg = M-bar K^2, checked here with a wider step than the registry uses
    plus, minus = curv3.shifted(1e-4), curv3.shifted(-1e-4)
    dK2 = (plus.metric(X0, Y0) ** 2 - minus.metric(X0, Y0) ** 2) / 2e-4
    mbar = fr.cartan_contraction(curv3, X0, Y0).M_bar
    assert dK2 == pytest.approx(mbar * curv3.metric(X0, Y0) ** 2, rel=1e-7)


def test_closed_form_on_larger_dimension():
    space = FinsleroidSpace(curved_field(4))
    x, y = sample_points(space, count=1, seed=9)[0]
    res = fr.closed_form_residuals(space, x, y, sample(space, x, y))
    assert max(v for k, v in res.items() if k not in CHARGE_KEYS) <= 1e-6
