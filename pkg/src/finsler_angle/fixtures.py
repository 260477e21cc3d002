"""Built-in fixture spaces and the admissible sample-point generator."""
from __future__ import annotations

from typing import Callable

import numpy as np

from . import tensor_core as tc
from .finsler_core import QuarticSpace, RiemannianSpace
from .finsleroid import FinsleroidSpace
from .riemann_base import RiemannField


def _ones(x):
    return 1.0 + 0.0 * x[0]


def flat_metric(n):
    return lambda x: np.eye(n) * _ones(x)


def conformal_metric(n, rate=0.2):
    """a = exp(rate * x^1) delta."""
    return lambda x: np.eye(n) * tc.exp(rate * x[0])


def round_metric(n, kappa=1.0):
    """a = delta / (1 + kappa |x|^2 / 4)^2, constant sectional curvature kappa."""
    def metric(x):
        r2 = (x * x).sum() if tc.is_jet(x) else float(np.dot(x, x))
        return np.eye(n) / (1.0 + 0.25 * kappa * r2) ** 2
    return metric


def first_axis(metric):
    """b_i proportional to a_{i1}, i.e. b points along d/dx^1."""
    return lambda x: metric(x)[:, 0]


def constant_charge(g0):
    return lambda x: g0 * _ones(x)


def linear_charge(g0=0.4, slope=0.2, axis=1):
    return lambda x: g0 + slope * x[axis]


def levi_civita_torsion(field_metric, n, strength=0.1):
    """S^m_{ij} = a^{mh} c eps_{hij} on the first three axes; skew as S_{mij} = -S_{jim}."""
    eps = np.zeros((n, n, n))
    for (i, j, k), sgn in {(0, 1, 2): 1, (1, 2, 0): 1, (2, 0, 1): 1,
                           (0, 2, 1): -1, (2, 1, 0): -1, (1, 0, 2): -1}.items():
        eps[i, j, k] = sgn
    def torsion(x):
        ainv = tc.inv(field_metric(x))
        return tc.einsum("mh,hij->mij", ainv, eps * strength) * _ones(x)
    return torsion


def flat_field(n=3, charge=0.8) -> RiemannField:
    m = flat_metric(n)
    return RiemannField(n, m, first_axis(m), constant_charge(charge), name="flat")


def curved_field(n=3, charge: Callable | None = None) -> RiemannField:
    m = conformal_metric(n)
    return RiemannField(n, m, first_axis(m), charge or linear_charge(), name="conformal")


def sphere_field(n=3) -> RiemannField:
    m = round_metric(n)
    return RiemannField(n, m, first_axis(m), name="round")


def _flat3(n):
    return FinsleroidSpace(flat_field(n), name="FLAT3")


def _curv3(n):
    return FinsleroidSpace(curved_field(n), name="CURV3")


def _curv3_const(n):
    return FinsleroidSpace(curved_field(n, constant_charge(0.6)), name="CURV3-CONST")


def _sphere3(n):
    return RiemannianSpace(sphere_field(n), name="SPHERE3")


def _riem_curv(n):
    return RiemannianSpace(curved_field(n), name="RIEM-CURV")


def _flat_riem(n):
    return RiemannianSpace(flat_field(n, 0.0), name="RIEM-FLAT")


def _quartic(n):
    return QuarticSpace(flat_field(n, 0.0), name="QUARTIC")


FIXTURES: dict[str, tuple[Callable, str]] = {
    "FLAT3": (_flat3, "Finsleroid, flat base, constant charge g = 0.8"),
    "CURV3": (_curv3, "Finsleroid, base exp(0.2 x^1) delta, charge 0.4 + 0.2 x^2, axis along d/dx^1"),
    "CURV3-CONST": (_curv3_const, "CURV3 base with constant charge g = 0.6"),
    "SPHERE3": (_sphere3, "Riemannian round metric delta / (1 + |x|^2/4)^2"),
    "RIEM-CURV": (_riem_curv, "Riemannian control on the CURV3 base"),
    "RIEM-FLAT": (_flat_riem, "Euclidean control"),
    "QUARTIC": (_quartic, "non-constant indicatrix curvature control (F^4-type perturbation)"),
}


def fixture(name: str, dim: int = 3):
    try:
        builder, _ = FIXTURES[name]
    except KeyError:
        raise KeyError(f"unknown fixture {name!r}") from None
    if dim not in (3, 4, 5):
        raise ValueError("dimension must be 3, 4 or 5")
    return builder(dim)


def sample_points(space, count: int = 64, seed: int = 42, box: float = 0.5, retry_cap: int = 100):
    """Random admissible (x, y) pairs; rejection sampling with a bounded retry budget."""
    rng = np.random.default_rng(seed)
    n = space.dim
    out = []
    tries = 0
    while len(out) < count:
        tries += 1
        if tries > retry_cap * count:
            raise RuntimeError("admissibility retry cap exhausted")
        x = rng.uniform(-box, box, n)
        y = rng.normal(size=n)
        if space.admissible(x, y) and _well_inside(space, x, y):
            out.append((x, y))
    return out


def _well_inside(space, x, y, floor=0.05):
    """Keep samples away from the axis so 1/q factors stay moderate."""
    if not hasattr(space, "scalars"):
        return True
    s = space.scalars(x, y)
    q, b = float(tc.value(s.q)), float(tc.value(s.b))
    return q / np.hypot(q, b) > floor
