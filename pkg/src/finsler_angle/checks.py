"""Registry of the numerical identities run by the ``verify`` harness.

Each identity maps one admissible sample point to a residual.  Identities
whose work is per scenario rather than per point (geodesic oracle, transport)
live in :mod:`finsler_angle.verify_cli`.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

from . import angle_transport as at
from . import conformal_map as cm
from . import connection as cn
from . import curvature as cv
from . import finsleroid as fr
from . import tensor_core as tc
from .finsler_core import indicatrix_curvature, sample, weyl_contraction_check
from .finsleroid import FinsleroidSpace


class Point:
    """Lazily built per-point objects shared by every identity at that point."""

    def __init__(self, space, x, y):
        self.space = space
        self.x = np.asarray(x, float)
        self.y = np.asarray(y, float)

    @cached_property
    def fiber(self):
        return sample(self.space, self.x, self.y)

    @cached_property
    def deformation(self):
        return cm.deform(self.space, self.x, self.y)

    @cached_property
    def frame(self):
        return cn.Frame(self.space, self.x, self.y)

    @cached_property
    def connection(self):
        return cn.connection_residuals(self.frame)

    @cached_property
    def metricity(self):
        return cn.metricity_residuals(self.frame)

    @cached_property
    def curvature(self):
        return cv.contraction_residuals(self.frame)

    @cached_property
    def routes(self):
        return cv.route_agreement(self.frame)

    @cached_property
    def closed_forms(self):
        return fr.closed_form_residuals(self.space, self.x, self.y, self.fiber)

    @cached_property
    def closed_forms_frame(self):
        return fr.frame_residuals(self.frame)

    @cached_property
    def coincidence(self):
        return at.coincidence_check(self.space, self.x, self.y, self.frame)

    @cached_property
    def chart(self):
        return at.indicatrix_chart(self.space, self.x, self.y)

    @property
    def H(self) -> float:
        return float(tc.value(self.space.H(self.x)))


@dataclass(frozen=True)
class Identity:
    name: str
    reference: str
    tolerance: float
    residual: Callable[[Point], float]
    applies: Callable = lambda space: True


def _finsleroid(space) -> bool:
    return isinstance(space, FinsleroidSpace)


def _deformable(space) -> bool:
    return hasattr(space, "unit_field") and not type(space).__name__.startswith("Quartic")


def _n4(space) -> bool:
    return space.dim >= 4


def _torsion_free(space) -> bool:
    """The curvature closed forms are built on the Levi-Civita curvature of a."""
    return _deformable(space) and space.field.torsion is None


def _flat_base(space) -> bool:
    return getattr(space.field, "name", "") == "flat"


def _max(d: dict, *keys) -> float:
    return float(max(d[k] for k in (keys or d)))


def _fiber_energy(p: Point) -> float:
    fs = p.fiber
    return abs(p.y @ fs.g @ p.y - fs.F ** 2)


def _weyl_zero(p: Point) -> float:
    return weyl_contraction_check(p.fiber).weyl_norm


def _explicit(p: Point) -> float:
    return float(np.abs(fr.explicit_connection(p.space, p.x, p.y).N - tc.value(p.frame.N)).max())


def _flat_curvature(p: Point) -> float:
    b = cv.curvature_bundle(p.frame)
    return float(max(np.abs(b.M).max(), np.abs(b.E).max(), np.abs(b.rho).max()))


def _chart_curvature(p: Point) -> float:
    return abs(p.chart.sectional - p.H ** 2) + p.chart.sectional_residual


IDENTITIES: dict[str, Identity] = {}


def register(name, reference, tolerance, residual, applies=lambda space: True):
    IDENTITIES[name] = Identity(name, reference, tolerance, residual, applies)


# fiber calculus
register("fiber.energy", "g(y, y) = F^2 (Euler homogeneity of F^2/2)", 1e-9, _fiber_energy)
register("fiber.cartan_y", "C_ijk y^k = 0", 1e-9,
         lambda p: float(np.abs(np.einsum("ijk,k->ij", p.fiber.C, p.y)).max()))
register("fiber.inverse", "g g^-1 = identity", 1e-9,
         lambda p: float(np.abs(p.fiber.g @ p.fiber.ginv - np.eye(p.space.dim)).max()))
register("indicatrix.constant_curvature",
         "S_nmij proportional to h wedge h (Frobenius residual of the fit)", 1e-7,
         lambda p: indicatrix_curvature(p.fiber).residual, _deformable)
register("indicatrix.curvature_value", "fitted indicatrix curvature equals H^2", 1e-6,
         lambda p: abs(indicatrix_curvature(p.fiber).c_ind - p.H ** 2), _deformable)
register("weyl.contraction",
         "(N-2) F^2 W_ijmn l^j l^n + S_im - S h_im / (N-1) = 0 (identity for any Finsler metric)",
         1e-9, lambda p: weyl_contraction_check(p.fiber).residual, _n4)
register("weyl.vanishing", "F^2 W_ijmn = 0 when the indicatrix has constant curvature", 1e-9,
         _weyl_zero, lambda s: _n4(s) and _finsleroid(s))

# conformal deformation
register("deformation.norm", "S(x, ybar) = F^H", 1e-10,
         lambda p: cm.deformation_identities(p.deformation)["norm"], _deformable)
register("deformation.pullback", "g = p^2 t^T a t", 1e-8,
         lambda p: float(np.abs(cm.pullback_metric(p.deformation) - p.fiber.g).max()), _deformable)
register("deformation.tensor", "C^T a C = g, C C-reciprocal = I, C y = F^(1-H) ybar", 1e-9,
         lambda p: _max(cm.deformation_identities(p.deformation), "pullback", "reciprocal",
                        "contraction", "multiplier"), _deformable)
register("deformation.jacobians", "contractions of the Jacobians t, y^m_i and t^i_mn", 1e-9,
         lambda p: _max(cm.jacobian_identities(p.deformation)), _deformable)
register("deformation.cartan", "Cartan tensor and its traces rebuilt from the deformation", 1e-9,
         lambda p: _max(cm.cartan_via_map(p.deformation)), _deformable)
register("deformation.unit_sphere", "indicatrix metric equals a / H^2 on the image sphere", 1e-9,
         lambda p: cm.unit_correspondence(p.space, p.x, p.y), _deformable)

# connection
register("connection.explicit", "generic N versus the explicit Finsleroid coefficients", 1e-6,
         _explicit, _finsleroid)
register("connection.alternative", "N through the multiplier and the reciprocal deformation", 1e-6,
         lambda p: p.connection["alternative_N"], _deformable)
register("connection.structure",
         "d_i F = 0, Euler relations of N and N_m, symmetry of N_mn, total-connection contractions",
         1e-9, lambda p: _max(p.connection, "d_F", "euler_N", "euler_Nd", "symmetry_Ndd",
                              "total_euler", "total_l", "closed_Nd"), _deformable)
register("connection.third_derivative", "N^k_mni = (2/H) H_m l^k h_ni / F - D_m C^k_ni", 1e-6,
         lambda p: p.connection["closed_Ndd"], _deformable)
register("connection.l_contraction", "F l_k N^k_imn = (2/H) H_i h_mn", 1e-7,
         lambda p: p.connection["l_contraction"], _deformable)
register("metricity.total", "T_i g_mn = 0", 1e-6, lambda p: p.metricity["T_g"], _deformable)
register("metricity.deflected", "D_i g_mn = -(2/H) H_i h_mn", 1e-6,
         lambda p: p.metricity["D_g"], _deformable)
register("metricity.deflection", "Delta^k_im = (1/H) H_i h^k_m", 1e-9,
         lambda p: p.connection["deflection"], _deformable)
register("metricity.extended",
         "T-constancy of F, l, p t, H p ybar, the reciprocal deformation; D-laws of U, h, S, ybar",
         1e-8, lambda p: _max(p.metricity), _deformable)

# Finsleroid closed forms
_CLOSED_FORMS = {
    "finsleroid.mbar_y": ("mbar_y", "dM-bar/dy^n = 2 (q^2/B) (2/(g N K)) A_n", 1e-6),
    "finsleroid.cartan_charge": ("cartan_g", "dA_mnj/dg in closed form (central difference in g)", 1e-5),
    "finsleroid.energy_charge": ("energy_g", "dK^2/dg = M-bar K^2 (central difference in g)", 1e-5),
    "finsleroid.breve_contracted": ("breve_contracted",
                                    "y_k d2 N-breve^k_i / dy^m dy^n = (2/h) h_i h_mn", 1e-6),
    "finsleroid.breve_contracted_jet": ("breve_contracted_jet",
                                        "same contraction from jet derivatives of N-breve", 1e-6),
    "finsleroid.breve_first": ("breve_first", "closed form of dN-breve^k_i/dy^m", 1e-6),
    "finsleroid.breve_second": ("breve_second", "closed form of d2 N-breve^k_i / dy^m dy^n", 1e-6),
    "finsleroid.cartan_y": ("cartan_y", "dA_ijk/dy^n representation through m_i and H_ij", 1e-6),
    "finsleroid.cartan_rep": ("cartan_rep", "A_ijk through A_i and h_ij", 1e-6),
}
for _name, (_key, _ref, _tol) in _CLOSED_FORMS.items():
    register(_name, _ref, _tol, lambda p, k=_key: p.closed_forms[k], _finsleroid)
register("finsleroid.deflected_h", "D_i h_nm = -(2/h) h_i h_nm", 1e-6,
         lambda p: p.closed_forms_frame["D_h"], _finsleroid)
register("finsleroid.third_N", "N^k_imn = (2/h) h_i l^k h_mn / K - D_i A^k_mn / K", 1e-6,
         lambda p: p.closed_forms_frame["third_N"], _finsleroid)

# curvature
register("curvature.m_commutator", "d_i N_j - d_j N_i (finite differences) equals closed-form M", 1e-5,
         lambda p: p.routes["fd_commutator"], _torsion_free)
register("curvature.m_jet", "d_i N_j - d_j N_i (jets) equals closed-form M", 1e-9,
         lambda p: p.routes["jet_commutator"], _torsion_free)
register("curvature.e_raw", "E from the definition equals its closed form", 1e-9,
         lambda p: p.routes["E_raw"], _torsion_free)
register("curvature.contractions", "y-contractions of M, E, rho; E symmetrization; rho skew", 1e-8,
         lambda p: _max(p.curvature), _torsion_free)
register("curvature.norms", "M lowering, |M|^2 and |rho|^2 through the base curvature (relative)",
         1e-5, lambda p: _max(cv.norm_identities(p.frame)), _torsion_free)
register("curvature.derivative", "T_l of M and rho through nabla of the base curvature", 1e-4,
         lambda p: _max(cv.curvature_derivative_check(p.frame)), _torsion_free)
register("curvature.commutator", "[T_i, T_j] on a (1,1) field through M and rho", 1e-8,
         lambda p: cv.commutator_law(p.frame), _torsion_free)
register("curvature.flat_base", "M, E and rho vanish over a flat base", 1e-10, _flat_curvature,
         lambda s: _torsion_free(s) and _flat_base(s))
register("transitivity", "T = C nabla on lifted fields; T C = 0 and T C-reciprocal = 0", 1e-6,
         lambda p: _max(cn.transitivity_check(p.frame)), _deformable)

# angle
register("coincidence.h_law", "D_i h_mn = (2/F) d_iF h_mn - (2/H) H_i h_mn", 1e-6,
         lambda p: p.coincidence["h_law"], _deformable)
register("coincidence.gradient", "first derivatives of alpha^2/2 vanish at coincidence", 1e-5,
         lambda p: p.coincidence["gradient"], _deformable)
register("coincidence.hessian", "second derivatives of alpha^2/2 tend to +-h_mn / F^2", 1e-4,
         lambda p: _max(p.coincidence, "hessian_11", "hessian_12", "hessian_22"), _deformable)
register("coincidence.third", "mixed third derivatives of alpha^2/2 at coincidence", 1e-4,
         lambda p: _max(p.coincidence, "third_211", "third_122"), _deformable)
register("coincidence.exact", "the same limits evaluated exactly at y1 = y2 (series for arccos^2)",
         1e-9, lambda p: _max(p.coincidence, *(k for k in p.coincidence if k.startswith("exact_"))),
         _deformable)
register("chart.identities", "induced metric, normal second fundamental form, S from I",
         1e-9, lambda p: _max(at.chart_residuals(p.space, p.x, p.chart)), _deformable)
register("chart.curvature", "indicatrix chart has constant sectional curvature H^2", 1e-8,
         _chart_curvature, _deformable)


def evaluate(space, x, y, names) -> dict[str, float]:
    """Residuals of the named identities at one point; failures become inf."""
    p = Point(space, x, y)
    out = {}
    for name in names:
        try:
            out[name] = float(IDENTITIES[name].residual(p))
        except (ArithmeticError, ValueError, np.linalg.LinAlgError):
            out[name] = float("inf")
    return out
