"""Numerical verification of the angle-preserving connection on Finsleroid spaces."""
from .angle_transport import closed_angle, geodesic_angle, horizontal_transport, indicatrix_chart
from .connection import Frame, n_coefficients
from .curvature import m_tensor, rho_tensor
from .finsler_core import Inadmissible, RiemannianSpace, sample
from .finsleroid import FinsleroidSpace
from .fixtures import FIXTURES, fixture, sample_points

__all__ = [
    "FIXTURES", "Frame", "FinsleroidSpace", "Inadmissible", "RiemannianSpace",
    "closed_angle", "fixture", "geodesic_angle", "horizontal_transport", "indicatrix_chart",
    "m_tensor", "n_coefficients", "rho_tensor", "sample", "sample_points",
]
