import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from finsler_angle import fixture, sample, sample_points
from finsler_angle.finsler_core import (Inadmissible, indicatrix_curvature, lower_s, h_wedge,
                                        weyl_contraction_check)

from conftest import X0, Y0

# independent 40-digit evaluation of K and its Hessian in y
FROZEN = {
    "FLAT3": (0.56717924842342273, [[0.80537699301148658, 0.19282745017715507, -0.15426196014172406],
                                    [0.19282745017715507, 0.42158219561212555, 0.056437302490874655],
                                    [-0.15426196014172406, 0.056437302490874655, 0.44697898173301914]]),
    "CURV3": (0.63598497280832804, [[0.86335857254610144, 0.14391264361705131, -0.11513011489364105],
                                    [0.14391264361705131, 0.65801270057684952, 0.042120773741575992],
                                    [-0.11513011489364105, 0.042120773741575992, 0.67696704876055872]]),
}


@pytest.mark.parametrize("name", sorted(FROZEN))
def test_fiber_matches_high_precision_values(name):
    F, g = FROZEN[name]
    fs = sample(fixture(name), X0, Y0)
    assert fs.F == pytest.approx(F, abs=1e-14)
    np.testing.assert_allclose(fs.g, g, atol=1e-13)


@pytest.mark.parametrize("name", ["FLAT3", "CURV3", "SPHERE3", "RIEM-CURV", "QUARTIC"])
def test_fiber_exactness(name):
    space = fixture(name)
    for x, y in sample_points(space, count=8, seed=11):
        fs = sample(space, x, y)
        assert abs(y @ fs.g @ y - fs.F ** 2) <= 1e-9
        assert np.abs(np.einsum("ijk,k->ij", fs.C, y)).max() <= 1e-9
        assert np.abs(fs.g @ fs.ginv - np.eye(3)).max() <= 1e-9
        assert np.abs(fs.h @ y).max() <= 1e-12


def test_riemannian_sample_reduces_to_base_metric():
    space = fixture("RIEM-CURV")
    fs = sample(space, X0, Y0)
    np.testing.assert_allclose(fs.g, space.field.a(X0), atol=1e-14)
    assert np.abs(fs.C).max() < 1e-14


def test_axis_direction_is_inadmissible(flat3):
    with pytest.raises(Inadmissible):
        sample(flat3, X0, np.array([1.0, 0.0, 0.0]))


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 10.0))
def test_metric_tensor_is_zero_homogeneous(scale):
    space = fixture("CURV3")
    a, b = sample(space, X0, Y0), sample(space, X0, scale * Y0)
    np.testing.assert_allclose(b.g, a.g, atol=1e-12)
    assert b.F == pytest.approx(scale * a.F, rel=1e-13)


@pytest.mark.parametrize("name", ["FLAT3", "CURV3"])
def test_indicatrix_has_constant_curvature_h_squared(name):
    space = fixture(name)
    for x, y in sample_points(space, count=8, seed=5):
        ic = indicatrix_curvature(sample(space, x, y))
        H = float(space.H(x))
        assert ic.residual <= 1e-7
        assert ic.c_ind == pytest.approx(H * H, abs=1e-6)


def test_riemannian_indicatrix_is_unit_sphere():
    ic = indicatrix_curvature(sample(fixture("SPHERE3"), X0, Y0))
    assert ic.c_ind == pytest.approx(1.0, abs=1e-12)


def test_quartic_indicatrix_curvature_varies_along_the_fiber():
    # a 2-dimensional indicatrix always fits the wedge form pointwise; the value must move
    space = fixture("QUARTIC")
    fs = sample(space, X0, Y0)
    other = indicatrix_curvature(sample(space, X0, np.array([1.0, -0.2, 0.1]))).c_ind
    assert abs(indicatrix_curvature(fs).c_ind - other) > 1e-2
    assert indicatrix_curvature(sample(fixture("QUARTIC", dim=4), np.r_[X0, 0.0], np.r_[Y0, 0.2])).residual > 1e-3
    S = lower_s(fs)
    assert np.abs(S + S.transpose(0, 1, 3, 2)).max() < 1e-13
    assert np.abs(h_wedge(fs.h)).max() > 0


def test_weyl_vanishes_for_finsleroid_in_four_dimensions():
    space = fixture("CURV3", dim=4)
    for x, y in sample_points(space, count=3, seed=2):
        w = weyl_contraction_check(sample(space, x, y))
        assert w.weyl_norm < 1e-9 and w.residual < 1e-9


def test_weyl_contraction_holds_without_constant_curvature():
    space = fixture("QUARTIC", dim=5)
    x, y = sample_points(space, count=1, seed=2)[0]
    w = weyl_contraction_check(sample(space, x, y))
    assert w.residual < 1e-9
    assert w.weyl_norm > 1e-3


def test_weyl_contraction_detects_wrong_metric():
    space = fixture("FLAT3", dim=4)
    x, y = sample_points(space, count=1, seed=2)[0]
    fs = sample(space, x, y)
    bump = 1e-3 * np.diag([1.0, -1.0, 0.5, 0.0])
    assert weyl_contraction_check(fs, fs.g + bump).residual > 1e-6


def test_weyl_needs_four_dimensions(flat3):
    with pytest.raises(ValueError):
        weyl_contraction_check(sample(flat3, X0, Y0))
