"""The angle-preserving nonlinear connection and its covariant derivatives.

A :class:`Frame` seeds one jet over the 2N variables (x, y) at a point, so
every x- and y-derivative needed downstream is exact.  Layouts:

* ``N[m, n]`` is N^m_n, ``Nd[k, n, m]`` is N^k_{nm}, ``Ndd[k, n, m, j]`` is N^k_{nmj}
* ``T[k, i, m]`` and ``Delta[k, i, m]`` carry the direction i in the middle
* covariant derivatives append the direction axis last

Index kinds for covariant derivatives: ``u``/``l`` for Finslerian upper and
lower indices, ``U``/``L`` for indices that transform with the Riemannian
connection (the t-side of the deformation).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import tensor_core as tc
from .finsler_core import Inadmissible, fiber_from_energy
from .riemann_base import BaseJets, _connection_term


class Frame:
    """All jets at one (x, y); ``order`` is the total Taylor order of the seed."""

    def __init__(self, space, x, y, order: int = 4):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        if not space.admissible(x, y):
            raise Inadmissible(f"inadmissible point x={x}, y={y}")
        n = x.shape[0]
        self.space, self.x, self.y, self.dim = space, x, y, n
        b = tc.basis(2 * n, order)
        self.X, self.Y = b.seed(x, 0), b.seed(y, n)
        self.xv, self.yv = list(range(n)), list(range(n, 2 * n))
        self.base = BaseJets(space.field, self.X, self.xv)
        self.a, self.L = self.base.a, self.base.L

        F = space.metric(self.X, self.Y)
        self.F = F
        H = space.H(self.X)
        self.H = H if tc.is_jet(H) else b.constant(np.asarray(H, float))
        self.H_i = self.H.grad(self.xv)
        self.y_low, self.g, self.C = fiber_from_energy(0.5 * F * F, self.yv)
        self.ginv = tc.inv(self.g)
        self.l_up = self.Y / F
        self.l_low = self.y_low / F
        self.h = self.g - tc.einsum("m,n->mn", self.l_low, self.l_low)
        eye = np.eye(n)
        self.h_mix = eye - tc.einsum("k,m->km", self.l_up, self.l_low)
        self.C_up = tc.einsum("kh,hij->kij", self.ginv, self.C)

        self.ybar = space.deform(self.X, self.Y)
        self.t = self.ybar.grad(self.yv)
        self.yinv = tc.inv(self.t)
        self.U = space.unit_field(self.X, self.Y)
        self.FH = tc.exp(self.H * tc.log(F))
        self.p = tc.exp((1.0 - self.H) * tc.log(F)) / self.H

        dxF = F.grad(self.xv)
        dxU = self.U.grad(self.xv)
        drive = dxU + tc.einsum("ink,k->in", self.L, self.U)
        self.N = -tc.einsum("m,n->mn", self.l_up, dxF) - tc.einsum("mi,in->mn", self.yinv, drive) * self.FH
        self.Nd = self.N.grad(self.yv)
        self.Ndd = self.Nd.grad(self.yv) if self.Nd.order > 0 else None
        self.Delta = tc.einsum("i,km->kim", self.H_i / self.H, self.h_mix)
        self.T = -self.Nd - self.Delta

    # derivative operators
    def d(self, f):
        """d_i f = df/dx^i + N^k_i df/dy^k, direction axis last."""
        return f.grad(self.xv) + tc.einsum("...k,ki->...i", f.grad(self.yv), self.N)

    def dy(self, f):
        return f.grad(self.yv)

    def connection(self, op: str):
        if op == "T":
            return self.T
        if op == "D":
            return -self.Nd
        raise ValueError(f"unknown operator {op!r}")

    def covariant(self, f, kinds: str, op: str = "T"):
        """d_i f plus one connection term per index of ``f``; result stays a jet."""
        if len(kinds) != f.ndim:
            raise ValueError(f"kinds {kinds!r} do not match a rank-{f.ndim} tensor")
        K = self.connection(op)
        out = self.d(f)
        for pos, kind in enumerate(kinds):
            coef = self.L if kind in "UL" else K
            out = out + _connection_term(coef, f, pos, +1.0 if kind in "uU" else -1.0, kind in "uU")
        return out

    def lift(self, W: Callable):
        """A t-side field W(x, t) composed with t = ybar(x, y)."""
        return W(self.X, self.ybar)

    def values(self, *names):
        return tuple(tc.value(getattr(self, nm)) for nm in names)


@dataclass(frozen=True)
class ConnectionBundle:
    N: np.ndarray
    Nd: np.ndarray
    Ndd: np.ndarray
    T: np.ndarray
    Delta: np.ndarray
    H: float
    H_i: np.ndarray


def bundle(frame: Frame) -> ConnectionBundle:
    H, H_i, N, Nd, T, Delta = frame.values("H", "H_i", "N", "Nd", "T", "Delta")
    return ConnectionBundle(N=N, Nd=Nd, Ndd=tc.value(frame.Ndd), T=T, Delta=Delta, H=float(H), H_i=H_i)


def n_coefficients(space, x, y) -> np.ndarray:
    return tc.value(Frame(space, x, y, order=3).N)


def derivative_coefficients(space, x, y):
    b = bundle(Frame(space, x, y))
    return b.Nd, b.Ndd


def total_connection(frame: Frame):
    return tc.value(frame.T), tc.value(frame.Delta)


def n_alternative(frame: Frame) -> np.ndarray:
    """N^m_n = d^Riem_n y^m(x, t) + (1/H) H_n y^m ln F.

    The inverse map enters only through its Jacobians: dy/dx at fixed t is
    -y^m_i dybar^i/dx^n and dy/dt is y^m_i.
    """
    yinv, ybar, L, H, H_i, F = frame.values("yinv", "ybar", "L", "H", "H_i", "F")
    dx_ybar = tc.value(frame.ybar.grad(frame.xv))
    riem = -yinv @ dx_ybar - np.einsum("mk,knj,j->mn", yinv, L, ybar)
    return riem + np.outer(frame.y, H_i) / H * np.log(F)


def nd_closed_form(frame: Frame) -> np.ndarray:
    """N^k_{mn} from F, l, C, N and the y-derivative of U, laid out [k, m, n]."""
    F, H, l_up, l_low, h, h_mix, C_up, N, yinv, FH = frame.values(
        "F", "H", "l_up", "l_low", "h", "h_mix", "C_up", "N", "yinv", "FH")
    xv = frame.xv
    dxF = tc.value(frame.F.grad(xv))
    dxl = tc.value(frame.l_low.grad(xv))               # [n, m] = d l_n / dx^m
    Uy = frame.U.grad(frame.yv)                         # [h, n]
    dxUy = tc.value(Uy.grad(xv))                        # [h, n, m]
    L = tc.value(frame.L)
    out = -np.einsum("kn,m->kmn", h_mix, dxF) / F - np.einsum("k,nm->kmn", l_up, dxl)
    out -= np.einsum("kns,sm->kmn", C_up, N)
    out += (np.einsum("n,ks,sm->kmn", l_low, h_mix, N) - (1 - H) * np.einsum("k,ns,sm->kmn", l_up, h, N)) / F
    drive = dxUy + np.einsum("hms,sn->hnm", L, tc.value(Uy))
    out -= FH * np.einsum("kh,hnm->kmn", yinv, drive)
    return out


def ndd_closed_form(frame: Frame) -> np.ndarray:
    """N^k_{mni} = (2/H) H_m l^k h_{ni} / F - D_m C^k_{ni}, laid out [k, m, n, i]."""
    F, H, H_i, l_up, h = frame.values("F", "H", "H_i", "l_up", "h")
    DC = tc.value(frame.covariant(frame.C_up, "ull", "D"))     # [k, n, i, m]
    return 2 / H * np.einsum("m,k,ni->kmni", H_i, l_up, h) / F - DC.transpose(0, 3, 1, 2)


def connection_residuals(frame: Frame) -> dict[str, float]:
    """Residuals of the identities satisfied by N and its y-derivatives."""
    F, H, H_i, y, l_low, h, h_mix = frame.values("F", "H", "H_i", "Y", "l_low", "h", "h_mix")
    N, Nd, T, Delta = frame.values("N", "Nd", "T", "Delta")
    Ndd = tc.value(frame.Ndd)
    dxF = tc.value(frame.F.grad(frame.xv))
    res = {
        "d_F": np.abs(dxF + l_low @ N).max(),
        "euler_N": np.abs(np.einsum("knm,m->kn", Nd, y) - N).max(),
        "euler_Nd": np.abs(np.einsum("knmj,m->knj", Ndd, y)).max(),
        "symmetry_Ndd": np.abs(Ndd - Ndd.transpose(0, 1, 3, 2)).max(),
        "alternative_N": np.abs(n_alternative(frame) - N).max(),
        "closed_Nd": np.abs(nd_closed_form(frame) - Nd).max(),
        "closed_Ndd": np.abs(ndd_closed_form(frame) - Ndd).max(),
        "l_contraction": np.abs(F * np.einsum("kinm,k->imn", Ndd, l_low)
                                - 2 / H * np.einsum("i,mn->imn", H_i, h)).max(),
        "deflection": np.abs(Delta - np.einsum("i,km->kim", H_i / H, h_mix)).max(),
        "total_euler": np.abs(np.einsum("kim,m->ki", T, y) + N).max(),
        "total_l": np.abs(np.einsum("k,kim->im", l_low, T) + np.einsum("k,kim->im", l_low, Nd)).max(),
    }
    return {k: float(v) for k, v in res.items()}


def metricity_residuals(frame: Frame) -> dict[str, float]:
    """Covariant constancy under T and the prescribed D-derivatives."""
    F, H, H_i, h, FH = frame.values("F", "H", "H_i", "h", "FH")
    cov = frame.covariant
    val = tc.value
    S = _s_jet(frame)
    hm = tc.value(frame.h_mix)
    S_law = -2 / H * (np.einsum("kj,mn,i->nkjmi", hm, h, H_i) - np.einsum("km,jn,i->nkjmi", hm, h, H_i))
    t_vec = val(frame.ybar)
    res = {
        "T_F": np.abs(val(cov(frame.F, "", "T"))).max(),
        "T_l": np.abs(val(cov(frame.l_low, "l", "T"))).max(),
        "T_g": np.abs(val(cov(frame.g, "ll", "T"))).max(),
        "D_U": np.abs(val(cov(frame.U, "U", "D"))).max(),
        "D_Uy": np.abs(val(cov(frame.U.grad(frame.yv), "Ul", "D"))).max(),
        "D_g": np.abs(val(cov(frame.g, "ll", "D")) + 2 / H * np.einsum("mn,k->mnk", h, H_i)).max(),
        "D_h": np.abs(val(cov(frame.h, "ll", "D")) + 2 / H * np.einsum("mn,k->mnk", h, H_i)).max(),
        "D_S": np.abs(val(cov(S, "lull", "D")) - S_law).max(),
        "D_t": np.abs(val(cov(frame.ybar, "U", "D")) - np.outer(t_vec, H_i) * np.log(F)).max(),
        "T_pt": np.abs(val(cov(frame.p * frame.t, "Ul", "T"))).max(),
        "T_Hpt": np.abs(val(cov(frame.H * frame.p * frame.ybar, "U", "T"))).max(),
        "T_Crec": np.abs(val(cov(frame.yinv / frame.p, "uL", "T"))).max(),
    }
    return {k: float(v) for k, v in res.items()}


def _s_jet(frame: Frame):
    """S_n^k_{jm} = (C^h_{nm} C^k_{hj} - C^h_{nj} C^k_{hm}) F^2 as a jet."""
    Cu = frame.C_up
    S = tc.einsum("hnm,khj->nkjm", Cu, Cu) - tc.einsum("hnj,khm->nkjm", Cu, Cu)
    return S * (frame.F * frame.F)


def deflection_control(frame: Frame) -> float:
    """Metricity defect of g under D alone; nonzero whenever H_i != 0."""
    return float(np.abs(tc.value(frame.covariant(frame.g, "ll", "D"))).max())


# built-in t-side test fields, homogeneous of degree 0 in t
def probe_covector(field):
    """W_m(x, t) = (1 + 0.3 x^1) a_mk t^k / S + 0.2 x^2 delta_m1."""
    def W(x, t):
        a = field.a(x)
        tl = tc.einsum("mk,k->m", a, t)
        S = tc.sqrt(tc.einsum("m,m->", tl, t))
        e = np.zeros(field.dim)
        e[0] = 1.0
        return tl * ((1.0 + 0.3 * x[0]) / S) + e * (0.2 * x[1])
    return W


def probe_mixed(field):
    """W^k_j(x, t) = t^k a_jm t^m / S^2 + (1 + 0.1 x^3 x^1) delta^k_j."""
    def W(x, t):
        a = field.a(x)
        tl = tc.einsum("mk,k->m", a, t)
        S2 = tc.einsum("m,m->", tl, t)
        return tc.einsum("k,j->kj", t, tl) / S2 + np.eye(field.dim) * (1.0 + 0.1 * x[-1] * x[0])
    return W


def _nabla_lifted(frame: Frame, Wj, kinds: str) -> np.ndarray:
    """Riemannian covariant derivative of a t-side field at t = ybar, direction last.

    ``Wj`` is W seeded on a fresh (x, t) jet so this path never touches N.
    """
    n = frame.dim
    L = tc.value(frame.L)
    t = tc.value(frame.ybar)
    out = tc.value(Wj.grad(list(range(n)))) - np.einsum(
        "...k,kij,j->...i", tc.value(Wj.grad(list(range(n, 2 * n)))), L, t)
    w = tc.value(Wj)
    for pos, kind in enumerate(kinds):
        out = out + _connection_term(L, w, pos, +1.0 if kind == "U" else -1.0, kind == "U")
    return out


def _xt_seed(frame: Frame, order: int = 1):
    n = frame.dim
    b = tc.basis(2 * n, order)
    return b.seed(frame.x, 0), b.seed(tc.value(frame.ybar), n)


def transitivity_check(frame: Frame, covector: Callable | None = None,
                       mixed: Callable | None = None) -> dict[str, float]:
    """T w = C . nabla W for pulled-back fields, and T C = 0, T C-tilde = 0."""
    field = frame.space.field
    covector = covector or probe_covector(field)
    mixed = mixed or probe_mixed(field)
    C = frame.p * frame.t
    Crec = frame.yinv / frame.p
    Cv, Crv = tc.value(C), tc.value(Crec)

    w = tc.einsum("mn,m->n", C, frame.lift(covector))
    lhs = tc.value(frame.covariant(w, "l", "T"))
    rhs = np.einsum("mn,mi->ni", Cv, _nabla_lifted(frame, covector(*_xt_seed(frame)), "L"))

    wm = tc.einsum("nk,kj,jm->nm", Crec, frame.lift(mixed), C)
    lhs_m = tc.value(frame.covariant(wm, "ul", "T"))
    rhs_m = np.einsum("nk,kji,jm->nmi", Crv, _nabla_lifted(frame, mixed(*_xt_seed(frame)), "UL"), Cv)
    return {
        "covector": float(np.abs(lhs - rhs).max()),
        "mixed": float(np.abs(lhs_m - rhs_m).max()),
        "T_C": float(np.abs(tc.value(frame.covariant(C, "Ul", "T"))).max()),
        "T_Crec": float(np.abs(tc.value(frame.covariant(Crec, "uL", "T"))).max()),
    }
