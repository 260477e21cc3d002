"""Finsler-space contract and the fiber-local quantities derived from F.

Layouts: ``C[i, j, k]`` is C_{ijk}, ``C_up[k, i, j]`` is C^k_{ij},
``S[n, k, i, j]`` is S_n^k_{ij}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, runtime_checkable

import numpy as np

from . import tensor_core as tc
from .riemann_base import RiemannField


class Inadmissible(ValueError):
    """(x, y) lies outside the admissible cone of the space."""


@runtime_checkable
class FinslerSpace(Protocol):
    dim: int
    field: RiemannField

    def metric(self, x, y): ...

    def H(self, x): ...

    def deform(self, x, y): ...

    def unit_field(self, x, y): ...

    def admissible(self, x, y) -> bool: ...


def _dot(a, u, v):
    return tc.einsum("...i,ij,...j->...", u, a, v)


class RiemannianSpace:
    """F = S = sqrt(a_mn y^m y^n); H = 1 and the deformation is the identity."""

    def __init__(self, field: RiemannField, name: str = "riemannian"):
        self.field = field
        self.dim = field.dim
        self.name = name

    def metric(self, x, y):
        return tc.sqrt(_dot(self.field.a(x), y, y))

    def H(self, x):
        return 1.0 + 0.0 * x[0]

    def deform(self, x, y):
        return y

    def unit_field(self, x, y):
        return y / self.metric(x, y)[..., None]

    def admissible(self, x, y) -> bool:
        return bool(np.linalg.norm(y) > 1e-12)


class QuarticSpace:
    """Non-constant-curvature control: F^2 = S^2 + eps * sum(y^4) / S^2."""

    def __init__(self, field: RiemannField, eps: float = 0.3, name: str = "quartic"):
        self.field = field
        self.dim = field.dim
        self.eps = eps
        self.name = name

    def metric(self, x, y):
        s2 = _dot(self.field.a(x), y, y)
        y2 = y * y
        return tc.sqrt(s2 + self.eps * (y2 * y2).sum(axis=-1) / s2)

    def H(self, x):
        return 1.0 + 0.0 * x[0]

    def deform(self, x, y):
        raise NotImplementedError("no conformal deformation exists for this space")

    unit_field = deform

    def admissible(self, x, y) -> bool:
        return bool(np.linalg.norm(y) > 1e-12)


@dataclass(frozen=True)
class FinslerSample:
    F: float
    l_up: np.ndarray
    l_low: np.ndarray
    y_low: np.ndarray
    g: np.ndarray
    ginv: np.ndarray
    C: np.ndarray
    C_up: np.ndarray
    h: np.ndarray

    @property
    def dim(self) -> int:
        return self.g.shape[0]


def fiber_from_energy(E, yv):
    """y_i, g_ij, C_ijk jets from a jet of E = F^2/2 over the y seeds ``yv``."""
    y_low = E.grad(yv)
    g = y_low.grad(yv)
    C = 0.5 * g.grad(yv)
    return y_low, g, C


def sample(space, x, y) -> FinslerSample:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if not space.admissible(x, y):
        raise Inadmissible(f"inadmissible point x={x}, y={y}")
    n = y.shape[0]
    b = tc.basis(n, 3)
    Y = b.seed(y)
    F = space.metric(x, Y)
    E = 0.5 * F * F
    yv = list(range(n))
    y_low, g, C = (tc.value(t) for t in fiber_from_energy(E, yv))
    Fv = float(F.value)
    if not np.isfinite(Fv) or Fv <= 0:
        raise Inadmissible("F not positive")
    ginv = tc.invert(g)
    l_low = y_low / Fv
    return FinslerSample(
        F=Fv, l_up=y / Fv, l_low=l_low, y_low=y_low, g=g, ginv=ginv, C=C,
        C_up=np.einsum("kh,hij->kij", ginv, C), h=g - np.outer(l_low, l_low),
    )


def s_tensor(s: FinslerSample) -> np.ndarray:
    """S_n^k_{ij} = (C^h_{nj} C^k_{hi} - C^h_{ni} C^k_{hj}) F^2."""
    Cu = s.C_up
    return (np.einsum("hnj,khi->nkij", Cu, Cu) - np.einsum("hni,khj->nkij", Cu, Cu)) * s.F ** 2


def lower_s(s: FinslerSample, S=None) -> np.ndarray:
    S = s_tensor(s) if S is None else S
    return np.einsum("kl,nlij->nkij", s.g, S)


def h_wedge(h) -> np.ndarray:
    """h_{nj} h_{mi} - h_{ni} h_{mj}, the constant-curvature form."""
    return np.einsum("nj,mi->nmij", h, h) - np.einsum("ni,mj->nmij", h, h)


@dataclass(frozen=True)
class IndicatrixCurvature:
    c_ind: float
    residual: float


def indicatrix_curvature(s: FinslerSample) -> IndicatrixCurvature:
    """Least-squares fit S_{nmij} = C (h wedge h); the indicatrix curvature is 1 - C."""
    S = lower_s(s)
    P = h_wedge(s.h)
    C = float(np.sum(S * P) / np.sum(P * P))
    return IndicatrixCurvature(c_ind=1.0 - C, residual=float(np.linalg.norm(S - C * P)))


@dataclass(frozen=True)
class WeylCheck:
    residual: float
    weyl_norm: float


def weyl_tensor(s: FinslerSample, g=None) -> np.ndarray:
    """F^2 W_{ijmn} assembled from S_{ijmn} = g_{jh} S_i^h_{mn}."""
    g = s.g if g is None else g
    n = g.shape[0]
    ginv = np.linalg.inv(g)
    S = np.einsum("jh,ihmn->ijmn", g, s_tensor(s))
    Sim = np.einsum("jn,ijmn->im", ginv, S)
    Sb = np.einsum("im,im->", ginv, Sim)
    W = S - (np.einsum("im,jn->ijmn", Sim, g) + np.einsum("jn,im->ijmn", Sim, g)
             - np.einsum("in,jm->ijmn", Sim, g) - np.einsum("jm,in->ijmn", Sim, g)) / (n - 2)
    W = W + Sb / ((n - 1) * (n - 2)) * (np.einsum("im,jn->ijmn", g, g) - np.einsum("in,jm->ijmn", g, g))
    return W, Sim, Sb


def weyl_contraction_check(s: FinslerSample, g=None) -> WeylCheck:
    """Norm of (N-2) F^2 W l^n l^j + S_im - S_breve h_im / (N-1), plus |W|.

    Passing a perturbed ``g`` recomputes every metric operation with it and is
    the negative control.
    """
    n = s.dim
    if n < 4:
        raise ValueError("the Weyl contraction check needs N >= 4")
    g = s.g if g is None else g
    W, Sim, Sb = weyl_tensor(s, g)
    l_low = g @ s.l_up
    h = g - np.outer(l_low, l_low)
    lhs = (n - 2) * np.einsum("ijmn,n,j->im", W, s.l_up, s.l_up)
    res = lhs + Sim - Sb * h / (n - 1)
    return WeylCheck(residual=float(np.linalg.norm(res)), weyl_norm=float(np.linalg.norm(W) / s.F ** 2))
