"""The associated Riemannian space: metric field, Christoffels, curvature, nabla.

Index layout used throughout the package:

* ``gamma[k, i, j]`` is a^k_{ij}
* ``L[m, i, j]`` is L^m_{ij} with ``i`` the differentiation direction
* ``riemann[k, h, i, j]`` is a_k^h_{ij}, antisymmetric in (i, j)

Every field provider takes ``x`` as either a plain array or a jet vector and
must only use operations from :mod:`finsler_angle.tensor_core`, so that
x-derivatives come out of the jet engine exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable

import numpy as np

from . import tensor_core as tc


def _zero_charge(x):
    return 0.0 * x[0]


@dataclass(frozen=True)
class RiemannField:
    """Metric a(x), axis covector b(x), Finsleroid charge g(x), torsion S(x)."""

    dim: int
    metric: Callable
    axis: Callable
    charge: Callable = _zero_charge
    torsion: Callable | None = None
    name: str = dc_field(default="field", compare=False)

    def a(self, x):
        return self.metric(x)

    def b(self, x):
        """Axis covector rescaled to unit a-length."""
        raw = self.axis(x)
        ainv = tc.inv(self.metric(x))
        norm2 = tc.einsum("i,ij,j->", raw, ainv, raw)
        return raw / tc.sqrt(norm2)

    def g(self, x):
        return self.charge(x)

    def S(self, x):
        """Torsion S^m_{ij}; zero unless a provider is given."""
        if self.torsion is None:
            return np.zeros((self.dim,) * 3)
        return self.torsion(x)


@dataclass(frozen=True)
class HScalar:
    H: float
    H_i: np.ndarray


def _x_jet(x, order):
    x = np.asarray(x, float)
    return tc.basis(x.shape[0], order).seed(x), list(range(x.shape[0]))


def gamma_from_metric(a, da):
    """Christoffels from a_{mn} and da[m, n, k] = d_k a_{mn} (arrays or jets)."""
    ainv = tc.inv(a)
    lowered = 0.5 * (tc.einsum("hji->hij", da) + da - tc.einsum("ijh->hij", da))
    return tc.einsum("kh,hij->kij", ainv, lowered), ainv


def curvature_from_gamma(gamma, dgamma):
    """a_k^h_{ij} from Christoffels and dgamma[h, k, j, i] = d_i gamma[h, k, j]."""
    r = tc.einsum("hkji->khij", dgamma) - tc.einsum("hkij->khij", dgamma)
    r = r + tc.einsum("ukj,hui->khij", gamma, gamma) - tc.einsum("uki,huj->khij", gamma, gamma)
    return r


class BaseJets:
    """Jets of the base geometry over a seeded x-jet; ``xvars`` are its seed indices."""

    def __init__(self, field: RiemannField, X, xvars):
        self.field = field
        self.X = X
        self.xvars = list(xvars)
        self.a = field.a(X)
        self.da = self.a.grad(self.xvars)
        self.gamma, self.ainv = gamma_from_metric(self.a, self.da)
        S = field.S(X)
        self.L = self.gamma + S if field.torsion is not None else self.gamma
        self._riemann = None

    @property
    def riemann(self):
        if self._riemann is None:
            self._riemann = curvature_from_gamma(self.gamma, self.gamma.grad(self.xvars))
        return self._riemann


def christoffel(field: RiemannField, x) -> np.ndarray:
    X, xv = _x_jet(x, 1)
    return tc.value(BaseJets(field, X, xv).gamma)


def metric_derivative(field: RiemannField, x) -> np.ndarray:
    """Analytic d_k a_{mn} as ``da[m, n, k]``."""
    X, xv = _x_jet(x, 1)
    return tc.value(field.a(X).grad(xv))


def linear_connection(field: RiemannField, x) -> np.ndarray:
    """L^m_{ij} = a^m_{ij} + S^m_{ij}."""
    X, xv = _x_jet(x, 1)
    return tc.value(BaseJets(field, X, xv).L)


def transport_coefficients(L, y):
    """L^m_i(x, y) = -L^m_{ij} y^j, linear in y."""
    return -tc.einsum("mij,j->mi", L, y)


def riemann_curvature(field: RiemannField, x) -> np.ndarray:
    X, xv = _x_jet(x, 2)
    return tc.value(BaseJets(field, X, xv).riemann)


def sectional_curvature(field: RiemannField, x, i: int, j: int) -> float:
    """<R(e_i, e_j) e_j, e_i> / (a_ii a_jj - a_ij^2)."""
    a = tc.value(field.a(np.asarray(x, float)))
    r = riemann_curvature(field, x)
    num = np.einsum("h,h->", r[j, :, i, j], a[:, i])
    return float(num / (a[i, i] * a[j, j] - a[i, j] ** 2))


def covariant_riemann_tensor(gamma, dT, T, kinds: str):
    """Riemannian covariant derivative of an x-only tensor; derivative axis last.

    ``kinds`` holds 'u' or 'l' per index of ``T``; ``dT`` carries d_i as its last axis.
    """
    out = dT
    for p, kind in enumerate(kinds):
        out = out + _connection_term(gamma, T, p, +1.0 if kind == "u" else -1.0, kind == "u")
    return out


def _connection_term(K, w, p, sign, upper):
    """sign * K[m, i, n] w^{..n..} (upper) or sign * K[h, i, m] w_{..h..} (lower), axis i last."""
    letters = "abcdefgh"[: w.ndim]
    old, new, der = "z", "y", "x"
    w_sub = letters[:p] + old + letters[p + 1:]
    out_sub = letters[:p] + new + letters[p + 1:] + der
    k_sub = new + der + old if upper else old + der + new
    return sign * tc.einsum(f"{w_sub},{k_sub}->{out_sub}", w, K)


def nabla(field: RiemannField, x, W: Callable, t, kinds: str) -> np.ndarray:
    """Covariant x-derivative of a tensor field W(x, t) evaluated along t.

    d^Riem_i W = dW/dx^i + L^k_i dW/dt^k with L^k_i = -L^k_{ij} t^j, then
    +L^n_{ih} W^h per upper index ('u') and -L^h_{im} W_h per lower ('l').
    """
    x = np.asarray(x, float)
    t = np.asarray(t, float)
    n = x.shape[0]
    b = tc.basis(2 * n, 1)
    X, T = b.seed(x, 0), b.seed(t, n)
    xv, tv = list(range(n)), list(range(n, 2 * n))
    Wj = W(X, T)
    if not tc.is_jet(Wj):
        Wj = b.constant(Wj)
    L = linear_connection(field, x)
    Lvec = transport_coefficients(L, t)
    w = tc.value(Wj)
    out = tc.value(Wj.grad(xv)) + np.einsum("...k,ki->...i", tc.value(Wj.grad(tv)), Lvec)
    for p, kind in enumerate(kinds):
        out = out + _connection_term(L, w, p, +1.0 if kind == "u" else -1.0, kind == "u")
    return out


def riemann_norm(field: RiemannField, x, t) -> float:
    a = tc.value(field.a(np.asarray(x, float)))
    return float(np.sqrt(t @ a @ t))


def riemann_angle(field: RiemannField, x, t1, t2) -> float:
    """arccos(a(t1, t2) / (S1 S2))."""
    a = tc.value(field.a(np.asarray(x, float)))
    s1, s2 = np.sqrt(t1 @ a @ t1), np.sqrt(t2 @ a @ t2)
    if s1 == 0 or s2 == 0:
        raise ValueError("zero-norm vector has no angle")
    return float(np.arccos(np.clip(t1 @ a @ t2 / (s1 * s2), -1.0, 1.0)))


def h_scalar(field: RiemannField, x) -> HScalar:
    """Finsleroid H = sqrt(1 - g^2/4) and its gradient."""
    X, xv = _x_jet(x, 1)
    H = finsleroid_h(field.g(X))
    if not tc.is_jet(H):
        return HScalar(float(H), np.zeros(len(xv)))
    return HScalar(float(H.value), tc.value(H.grad(xv)))


def finsleroid_h(g):
    return tc.sqrt(1.0 - 0.25 * g * g)


def parallel_transport(field: RiemannField, curve: Callable, v0, steps: int = 1000, length: float = 1.0):
    """RK4 for dv^k/ds = -L^k_{ij} xdot^i v^j; returns the list of (s, x, v)."""
    def rhs(s, v):
        x, xdot = curve(s)
        L = linear_connection(field, x)
        return -np.einsum("kij,i,j->k", L, xdot, v)

    ds = length / steps
    v = np.asarray(v0, float)
    out = [(0.0, curve(0.0)[0], v.copy())]
    for k in range(steps):
        s = k * ds
        k1 = rhs(s, v)
        k2 = rhs(s + ds / 2, v + ds / 2 * k1)
        k3 = rhs(s + ds / 2, v + ds / 2 * k2)
        k4 = rhs(s + ds, v + ds * k3)
        v = v + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out.append((s + ds, curve(s + ds)[0], v.copy()))
    return out
