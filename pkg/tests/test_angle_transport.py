import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsler_angle import angle_transport as at
from finsler_angle import fixture
from finsler_angle.connection import Frame
from finsler_angle.finsler_core import Inadmissible

from conftest import X0, Y0, Y1

Y2 = np.array([0.6, 0.2, 0.3])

# independent 40-digit evaluation of arccos(a(U1, U2)) / H at (X0, Y0, Y1)
FROZEN_ANGLE = {"FLAT3": 1.8753370643165092, "CURV3": 2.1167193489027338}


@pytest.mark.parametrize("name", sorted(FROZEN_ANGLE))
def test_closed_angle_frozen(name):
    assert at.closed_angle(fixture(name), X0, Y0, Y1) == pytest.approx(FROZEN_ANGLE[name], abs=1e-13)


def test_riemannian_angle_is_euclidean_angle():
    space = fixture("RIEM-FLAT")
    expected = np.arccos(Y0 @ Y1 / np.linalg.norm(Y0) / np.linalg.norm(Y1))
    assert at.closed_angle(space, X0, Y0, Y1) == pytest.approx(expected, abs=1e-14)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0), st.floats(0.1, 10.0))
def test_angle_is_scale_invariant_and_symmetric(s1, s2):
    space = fixture("CURV3")
    base = at.closed_angle(space, X0, Y0, Y1)
    assert at.closed_angle(space, X0, s1 * Y0, s2 * Y1) == pytest.approx(base, abs=1e-12)
    assert at.closed_angle(space, X0, Y1, Y0) == pytest.approx(base, abs=1e-14)


def test_angle_of_vector_with_itself_is_zero(curv3):
    assert at.closed_angle(curv3, X0, Y0, 3.0 * Y0) == pytest.approx(0.0, abs=1e-7)


def test_angle_energy_matches_closed_angle(curv3):
    assert float(at.angle_energy(curv3, X0, Y0, Y2)) == pytest.approx(
        0.5 * at.closed_angle(curv3, X0, Y0, Y2) ** 2, abs=1e-14)


def test_lambda_outside_range_is_an_error():
    with pytest.raises(ValueError):
        at._clamped_lambda(1.0 + 1e-9)
    assert at._clamped_lambda(1.0 + 1e-13) == 1.0


@pytest.mark.parametrize("name", ["FLAT3", "CURV3", "SPHERE3"])
def test_geodesic_oracle_agrees_with_closed_form(name):
    space = fixture(name)
    res = at.geodesic_angle(space, X0, Y0, Y2, segments=100)
    assert res.converged
    assert res.angle == pytest.approx(at.closed_angle(space, X0, Y0, Y2), abs=5e-5)


def test_geodesic_error_is_second_order(sphere3):
    exact = at.closed_angle(sphere3, X0, Y0, Y2)
    e1 = abs(at.geodesic_angle(sphere3, X0, Y0, Y2, segments=50).angle - exact)
    e2 = abs(at.geodesic_angle(sphere3, X0, Y0, Y2, segments=100).angle - exact)
    assert 3.5 < e1 / e2 < 4.5


def test_geodesic_history_decreases(sphere3):
    res = at.geodesic_angle(sphere3, X0, Y0, Y2, segments=50)
    energy = np.array([e for e, _ in res.history])
    assert np.all(np.diff(energy) <= 1e-14)
    assert sorted(res.lengths) == [25, 50]


def test_geodesic_coincident_rays(curv3):
    assert at.geodesic_angle(curv3, X0, Y0, 2 * Y0).angle == 0.0


def test_geodesic_rejects_axis(curv3):
    with pytest.raises(Inadmissible):
        at.geodesic_angle(curv3, X0, Y0, np.array([1.0, 0.0, 0.0]))


@pytest.mark.parametrize("name", ["FLAT3", "CURV3"])
def test_indicatrix_chart(name):
    space = fixture(name)
    chart = at.indicatrix_chart(space, X0, Y0)
    H = float(space.H(X0))
    assert max(at.chart_residuals(space, X0, chart).values()) <= 1e-9
    assert chart.sectional == pytest.approx(H * H, abs=1e-8)
    assert chart.sectional_residual <= 1e-8


@pytest.fixture(scope="module")
def curv3_transport(curv3):
    curve = at.bent_curve([0.1, -0.2, 0.15], [0.3, 0.4, -0.2])
    return at.horizontal_transport(curv3, curve, (Y0, Y2), steps=100)


def test_transport_preserves_norm_and_scaled_angle(curv3_transport):
    d = curv3_transport.drift()
    assert d["F1"] <= 1e-6 and d["F2"] <= 1e-6
    assert d["H_alpha"] <= 1e-5
    # the bare angle does move, since H changes along the curve
    assert d["alpha"] > 1e-3


def test_transport_recurrence_law(curv3_transport):
    assert curv3_transport.drift()["recurrence"] <= 1e-4


def test_transport_on_flat_line_keeps_angle(flat3):
    st_ = at.horizontal_transport(flat3, at.line_curve([0, 0, 0], [0.3, 0.2, -0.1]), (Y0, Y2), steps=20)
    assert st_.drift()["alpha"] < 1e-12
    np.testing.assert_allclose(st_.y1[-1], Y0, atol=1e-12)


def test_trace_rows_follow_header(curv3_transport):
    rows = list(curv3_transport.rows())
    assert len(rows) == 101
    assert all(len(r) == len(at.TRACE_HEADER) for r in rows)
    assert at.TRACE_HEADER == ("s", "F1", "F2", "alpha", "H", "H_alpha", "dalpha_ds", "rhs")


def test_coincidence_limits(curv3):
    res = at.coincidence_check(curv3, X0, Y0)
    assert res["h_law"] <= 1e-6
    assert max(res[k] for k in ("hessian_11", "hessian_12", "hessian_22")) <= 1e-4
    assert max(res[k] for k in ("third_211", "third_122")) <= 1e-4
    assert res["gradient"] <= 1e-5
    assert max(v for k, v in res.items() if k.startswith("exact_")) <= 1e-9


def test_literal_third_order_form_fails(curv3):
    # the third-order limit needs h_nk l_m + h_mk l_n; doubling one term does not fit
    fr = Frame(curv3, X0, Y0)
    F, h, l_low, C = fr.values("F", "h", "l_low", "C")
    n = 3
    _, _, third = at.energy_derivatives(curv3, X0, Y0, Y0)
    e211 = third[n:, :n, :n]
    literal = 2 * np.einsum("nm,k->kmn", h, l_low) / F ** 3 - C / F ** 2
    assert np.abs(e211 - literal).max() > 1e-2
