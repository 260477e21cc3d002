"""The twelve acceptance criteria at their stated tolerances.

Each test prints one PASS/FAIL line; the lines are repeated in the terminal
summary.  Run ``python tests/test_acceptance.py`` for the lines alone.
"""
import numpy as np
import pytest

from finsler_angle import angle_transport as at
from finsler_angle import fixture, sample_points
from finsler_angle.checks import evaluate
from finsler_angle.connection import Frame, deflection_control

SAMPLES = 64
SEED = 42
LINES = []

FIBER = ["fiber.energy", "fiber.cartan_y", "fiber.inverse"]
INDICATRIX = ["indicatrix.constant_curvature", "indicatrix.curvature_value"]
CLOSED_FORMS = ["finsleroid.mbar_y", "finsleroid.cartan_charge", "finsleroid.energy_charge",
            "finsleroid.breve_contracted", "finsleroid.breve_first", "finsleroid.breve_second",
            "finsleroid.cartan_y", "finsleroid.cartan_rep", "finsleroid.deflected_h",
            "finsleroid.third_N"]
CURV3_NAMES = FIBER + INDICATRIX + CLOSED_FORMS + [
    "deformation.norm", "deformation.pullback",
    "connection.explicit", "connection.alternative",
    "metricity.total", "metricity.deflected", "metricity.deflection",
    "connection.third_derivative", "connection.l_contraction",
    "curvature.m_commutator", "curvature.contractions", "curvature.norms", "curvature.derivative",
    "transitivity", "coincidence.h_law", "coincidence.hessian",
]
FLAT3_NAMES = FIBER + INDICATRIX + ["deformation.norm", "deformation.pullback",
                                    "connection.explicit", "connection.alternative",
                                    "metricity.total", "metricity.deflected", "curvature.flat_base"]


def _worst(space, names, count=SAMPLES):
    rows = [evaluate(space, x, y, names) for x, y in sample_points(space, count, SEED)]
    return {n: max(r[n] for r in rows) for n in names}


@pytest.fixture(scope="module")
def curv3():
    space = fixture("CURV3")
    return space, _worst(space, CURV3_NAMES)


@pytest.fixture(scope="module")
def flat3():
    space = fixture("FLAT3")
    return space, _worst(space, FLAT3_NAMES)


def _verdict(number, title, checks):
    """checks: (label, residual, tolerance, passes-when-below)."""
    ok = all((r <= tol) if below else (r > tol) for _, r, tol, below in checks)
    detail = ", ".join(f"{label} {r:.2e}{'<=' if below else '>'}{tol:.0e}" for label, r, tol, below in checks)
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title} [{detail}]"
    LINES.append(line)
    print(line)
    assert ok, line


def _below(label, r, tol):
    return (label, float(r), tol, True)


def test_criterion_01_fiber_exactness(curv3, flat3):
    checks = []
    for name in ("SPHERE3", "RIEM-CURV", "CURV3-CONST"):
        w = _worst(fixture(name), FIBER)
        checks.append(_below(name, max(w.values()), 1e-9))
    for label, (_, w) in (("CURV3", curv3), ("FLAT3", flat3)):
        checks.append(_below(label, max(w[n] for n in FIBER), 1e-9))
    _verdict(1, "fiber calculus exactness", checks)


def test_criterion_02_indicatrix_constant_curvature(curv3, flat3):
    checks = []
    for label, (_, w) in (("FLAT3", flat3), ("CURV3", curv3)):
        checks.append(_below(f"{label} S-form", w["indicatrix.constant_curvature"], 1e-7))
        checks.append(_below(f"{label} C_ind-H^2", w["indicatrix.curvature_value"], 1e-6))
    _verdict(2, "indicatrix constant curvature H^2", checks)


def test_criterion_03_conformal_correspondence(curv3, flat3):
    checks = []
    for label, (_, w) in (("FLAT3", flat3), ("CURV3", curv3)):
        checks.append(_below(f"{label} |S-F^H|", w["deformation.norm"], 1e-10))
        checks.append(_below(f"{label} pullback", w["deformation.pullback"], 1e-8))
    _verdict(3, "conformal correspondence", checks)


def test_criterion_04_connection_cross_validation(curv3, flat3):
    checks = []
    for label, (_, w) in (("FLAT3", flat3), ("CURV3", curv3)):
        checks.append(_below(f"{label} generic-explicit", w["connection.explicit"], 1e-6))
        checks.append(_below(f"{label} alternative", w["connection.alternative"], 1e-6))
    _verdict(4, "connection cross-validation", checks)


def test_criterion_05_metricity_and_deflection(curv3):
    _, w = curv3
    _verdict(5, "metricity and deflection", [
        _below("T g", w["metricity.total"], 1e-6),
        _below("D g + (2/H) H_i h", w["metricity.deflected"], 1e-6),
        _below("Delta consistency", w["metricity.deflection"], 1e-9),
    ])


def test_criterion_06_derivative_coefficients(curv3):
    _, w = curv3
    _verdict(6, "derivative-coefficient identity", [
        _below("N^k_mni closed form", w["connection.third_derivative"], 1e-6),
        _below("l contraction", w["connection.l_contraction"], 1e-7),
    ])


def test_criterion_07_finsleroid_closed_forms(curv3):
    _, w = curv3
    checks = [_below(n.split(".")[1], w[n], 1e-5 if n.endswith("_charge") else 1e-6) for n in CLOSED_FORMS]
    _verdict(7, "Finsleroid closed-form suite", checks)


GEODESIC_PAIR = (np.array([0.1, -0.2, 0.3]), np.array([0.3, 0.5, -0.4]), np.array([0.6, 0.2, 0.3]))


def test_criterion_08_angle_equivalence():
    x, y1, y2 = GEODESIC_PAIR
    checks = []
    for name in ("FLAT3", "CURV3"):
        space = fixture(name)
        geo = at.geodesic_angle(space, x, y1, y2, segments=400)
        checks.append(_below(name, abs(geo.angle - at.closed_angle(space, x, y1, y2)), 1e-4))
    sphere = fixture("SPHERE3")
    geo = at.geodesic_angle(sphere, x, y1, y2, segments=400)
    great = np.arccos(y1 @ y2 / np.linalg.norm(y1) / np.linalg.norm(y2))
    checks.append(_below("SPHERE3 vs great circle", abs(geo.angle - great), 1e-5))
    _verdict(8, "closed-form angle versus discrete geodesic", checks)


def test_criterion_09_preservation_laws():
    space = fixture("CURV3")
    curve = at.bent_curve([0.1, -0.2, 0.15], [0.3, 0.4, -0.2])
    state = at.horizontal_transport(space, curve, ([1.0, 0.3, -0.2], [0.2, 1.0, 0.4]), steps=1000)
    d = state.drift()
    control = min(deflection_control(Frame(space, x, y, order=3))
                  for x, y in sample_points(space, 8, SEED))
    _verdict(9, "preservation along a unit-length CURV3 curve", [
        _below("F drift", max(d["F1"], d["F2"]), 1e-6),
        _below("H alpha drift", d["H_alpha"], 1e-5),
        _below("recurrence", d["recurrence"], 1e-4),
        ("no-Delta metricity (control)", control, 10 * 1e-6, False),
    ])


def test_criterion_10_curvature(curv3, flat3):
    _, w = curv3
    _, wf = flat3
    _verdict(10, "curvature tensors", [
        _below("commutator vs closed M", w["curvature.m_commutator"], 1e-5),
        _below("contractions", w["curvature.contractions"], 1e-8),
        _below("squared norms (relative)", w["curvature.norms"], 1e-5),
        _below("derivative identity", w["curvature.derivative"], 1e-4),
        _below("flat base", wf["curvature.flat_base"], 1e-10),
    ])


def test_criterion_11_transitivity(curv3):
    _, w = curv3
    _verdict(11, "transitivity T = C nabla", [_below("T = C nabla, T C", w["transitivity"], 1e-6)])


def test_criterion_12_coincidence_limits(curv3):
    _, w = curv3
    _verdict(12, "coincidence limits", [
        _below("D h law", w["coincidence.h_law"], 1e-6),
        _below("extrapolated Hessian", w["coincidence.hessian"], 1e-4),
    ])


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
