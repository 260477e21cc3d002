"""Curvature of the angle-preserving connection: M, E, rho and their identities.

Layouts: ``M[n, i, j]`` is M^n_{ij}; ``E[k, n, i, j]`` and ``rho[k, n, i, j]``
are E_k^n_{ij} and rho_k^n_{ij}; ``R[h, t, i, j]`` is a_h^t_{ij}.  The
closed forms are built as jets on the :class:`~finsler_angle.connection.Frame`
so their covariant derivatives come out exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .connection import Frame, n_coefficients
from .riemann_base import covariant_riemann_tensor

FD_STEP = 1e-4


def m_closed(frame: Frame):
    """M^n_{ij} = -y^n_t t^h a_h^t_{ij}."""
    return -tc.einsum("nt,h,htij->nij", frame.yinv, frame.ybar, frame.base.riemann)


def m_jet_commutator(frame: Frame):
    """d_i N^n_j - d_j N^n_i with every derivative from the jet."""
    dN = frame.d(frame.N)                                   # [n, j, i]
    return tc.einsum("nji->nij", dN) - dN


def m_fd_commutator(frame: Frame, step: float = FD_STEP) -> np.ndarray:
    """d_i N^n_j - d_j N^n_i with dN/dx by Richardson central differences at fixed y."""
    space, y = frame.space, frame.y
    dxN = tc.fd_gradient_x(lambda xx: n_coefficients(space, xx, y), frame.x, step)   # [n, j, i]
    N, Nd = frame.values("N", "Nd")
    dN = dxN + np.einsum("njk,ki->nji", Nd, N)
    return dN.transpose(0, 2, 1) - dN


def e_closed(frame: Frame, M=None):
    """E_k^n_{ij} = y^n_h t^h_{km} M^m_{ij} + y^n_m a_h^m_{ij} t^h_k."""
    M = m_closed(frame) if M is None else M
    t2 = frame.t.grad(frame.yv)
    return (tc.einsum("nh,hkm,mij->knij", frame.yinv, t2, M)
            + tc.einsum("nm,hmij,hk->knij", frame.yinv, frame.base.riemann, frame.t))


def e_raw(frame: Frame):
    """d_i T^n_{jk} - d_j T^n_{ik} + T^m_{jk} T^n_{im} - T^m_{ik} T^n_{jm}."""
    T = frame.T
    dT = frame.d(T)                                         # [n, j, k, i]
    first = tc.einsum("njki->knij", dT)
    quad = tc.einsum("mjk,nim->knij", T, T)
    return first - tc.einsum("knij->knji", first) + quad - tc.einsum("knij->knji", quad)


def rho_closed(frame: Frame, M=None):
    """rho_k^n_{ij} = -(1-H)(l_k delta^n_m - l^n g_mk) M^m_{ij} / F + y^n_m a_h^m_{ij} t^h_k."""
    M = m_closed(frame) if M is None else M
    n = frame.dim
    proj = tc.einsum("k,nm->knm", frame.l_low, np.eye(n)) - tc.einsum("n,mk->knm", frame.l_up, frame.g)
    first = tc.einsum("knm,mij->knij", proj, M) * ((frame.H - 1.0) / frame.F)
    return first + tc.einsum("nm,hmij,hk->knij", frame.yinv, frame.base.riemann, frame.t)


def rho_from_e(frame: Frame, E, M):
    """rho = E - M^h_{ij} C^n_{hk}."""
    return E - tc.einsum("hij,nhk->knij", M, frame.C_up)


@dataclass(frozen=True)
class CurvatureBundle:
    M: np.ndarray
    E: np.ndarray
    rho: np.ndarray
    R: np.ndarray
    rho_sq: float
    a_sq: float
    m_sq: float


def _contractions(frame: Frame, M, rho):
    ainv = tc.value(frame.base.ainv)
    a, g, ginv = frame.values("a", "g", "ginv")
    R = tc.value(frame.base.riemann)
    ybar = tc.value(frame.ybar)
    rho_sq = np.einsum("knij,pmab,kp,nm,ia,jb->", rho, rho, ginv, g, ainv, ainv)
    a_sq = np.einsum("knij,pmab,kp,nm,ia,jb->", R, R, ainv, a, ainv, ainv)
    m_sq = np.einsum("nij,mab,nm,ia,jb->", M, M, g, ainv, ainv)
    tR = np.einsum("l,lnij->nij", ybar, R)
    tRtR = np.einsum("nij,mab,nm,ia,jb->", tR, tR, a, ainv, ainv)
    return float(rho_sq), float(a_sq), float(m_sq), float(tRtR)


def curvature_bundle(frame: Frame) -> CurvatureBundle:
    M = m_closed(frame)
    E = tc.value(e_closed(frame, M))
    rho = tc.value(rho_closed(frame, M))
    Mv = tc.value(M)
    rho_sq, a_sq, m_sq, _ = _contractions(frame, Mv, rho)
    return CurvatureBundle(M=Mv, E=E, rho=rho, R=tc.value(frame.base.riemann),
                           rho_sq=rho_sq, a_sq=a_sq, m_sq=m_sq)


def m_tensor(space, x, y, route: str = "closed_form") -> np.ndarray:
    frame = Frame(space, x, y)
    if route == "closed_form":
        return tc.value(m_closed(frame))
    if route == "commutator":
        return m_fd_commutator(frame)
    if route == "jet":
        return tc.value(m_jet_commutator(frame))
    raise ValueError(f"unknown route {route!r}")


def rho_tensor(space, x, y) -> np.ndarray:
    return tc.value(rho_closed(Frame(space, x, y)))


def _rel(res, scale):
    return float(res / max(scale, 1e-300)) if scale > 1e-14 else float(res)


def contraction_residuals(frame: Frame) -> dict[str, float]:
    """Contractions of M, E and rho with y, the E symmetrization and rho skew symmetry."""
    M = m_closed(frame)
    Mv = tc.value(M)
    E = tc.value(e_closed(frame, M))
    rho = tc.value(rho_closed(frame, M))
    y, y_low, g, C = frame.values("Y", "y_low", "g", "C")
    M_low = np.einsum("nm,mij->nij", g, Mv)
    E_low = np.einsum("nm,kmij->knij", g, E)
    rho_low = np.einsum("nm,kmij->knij", g, rho)
    res = {
        "yM": np.abs(y_low @ Mv.reshape(len(y), -1)).max(),
        "yE_up": np.abs(np.einsum("k,knij->nij", y, E) + Mv).max(),
        "yE_low": np.abs(np.einsum("n,knij->kij", y_low, E) - M_low).max(),
        "E_sym": np.abs(E_low + E_low.transpose(1, 0, 2, 3) - 2 * np.einsum("mnh,hij->mnij", C, Mv)).max(),
        "rho_skew": np.abs(rho_low + rho_low.transpose(1, 0, 2, 3)).max(),
        "yrho_up": np.abs(np.einsum("k,knij->nij", y, rho) + Mv).max(),
        "yrho_low": np.abs(np.einsum("n,knij->kij", y_low, rho) - M_low).max(),
        "rho_def": np.abs(tc.value(rho_from_e(frame, E, Mv)) - rho).max(),
    }
    return {k: float(v) for k, v in res.items()}


def norm_identities(frame: Frame) -> dict[str, float]:
    """Relative residuals of the M lowering, M.M and rho.rho identities."""
    M = tc.value(m_closed(frame))
    rho = tc.value(rho_closed(frame))
    a, g, t, ybar, p, H = frame.values("a", "g", "t", "ybar", "p", "H")
    R = tc.value(frame.base.riemann)
    R_low = np.einsum("lr,hrij->hlij", a, R)                       # a_{hlij}
    M_low = np.einsum("nm,mij->nij", g, M)
    M_rep = -p ** 2 * np.einsum("h,mn,hmij->nij", ybar, t, R_low)
    rho_sq, a_sq, m_sq, tRtR = _contractions(frame, M, rho)
    S2 = float(ybar @ a @ ybar)
    scale = max(a_sq, 1e-300)
    return {
        "M_lowered": _rel(np.abs(M_low - M_rep).max(), np.abs(M_low).max()),
        "M_square": _rel(abs(m_sq - p ** 2 * tRtR), abs(m_sq)),
        "rho_square": _rel(abs(rho_sq - a_sq - 2 / S2 * (1 / H ** 2 - 1) * tRtR), scale),
    }


def _nabla_riemann(frame: Frame):
    """nabla_l a_h^t_{ij} with direction axis last."""
    R = frame.base.riemann
    gamma = tc.value(frame.base.gamma)
    return covariant_riemann_tensor(gamma, tc.value(R.grad(frame.xv)), tc.value(R), "lull")


def curvature_derivative_check(frame: Frame) -> dict[str, float]:
    """T_l M and T_l rho against the nabla of the base curvature."""
    M = m_closed(frame)
    rho = rho_closed(frame, M)
    F, H, H_i, l_low, l_up, g, yinv, t, ybar = frame.values(
        "F", "H", "H_i", "l_low", "l_up", "g", "yinv", "t", "ybar")
    Mv = tc.value(M)
    R = tc.value(frame.base.riemann)
    nR = _nabla_riemann(frame)                                        # [h, t, i, j, l]
    shifted = nR - np.einsum("htij,l->htijl", R, H_i / H)
    TM = tc.value(frame.covariant(M, "uLL", "T"))
    rhs_M = -np.einsum("nt,h,htijl->nijl", yinv, ybar, shifted)
    n = frame.dim
    proj = np.einsum("k,nm->knm", l_low, np.eye(n)) - np.einsum("n,mk->knm", l_up, g)
    Trho = tc.value(frame.covariant(rho, "luLL", "T"))
    rhs_rho = ((1 - H) / F * np.einsum("knm,mt,h,htijl->knijl", proj, yinv, ybar, shifted)
               + np.einsum("nm,hk,hmijl->knijl", yinv, t, nR)
               + np.einsum("l,knm,mij->knijl", H_i, proj, Mv) / F)
    return {
        "T_M": float(np.abs(TM - rhs_M).max()),
        "T_rho": float(np.abs(Trho - rhs_rho).max()),
    }


def route_agreement(frame: Frame) -> dict[str, float]:
    M = tc.value(m_closed(frame))
    return {
        "fd_commutator": float(np.abs(m_fd_commutator(frame) - M).max()),
        "jet_commutator": float(np.abs(tc.value(m_jet_commutator(frame)) - M).max()),
        "E_raw": float(np.abs(tc.value(e_raw(frame)) - tc.value(e_closed(frame))).max()),
    }


def probe_tensor(frame: Frame):
    """A (1,1) field w^n_k(x, y) with genuine x- and y-dependence."""
    X, Y = frame.X, frame.Y
    a = frame.a
    ay = tc.einsum("mk,m->k", a, Y)
    s2 = tc.einsum("k,k->", ay, Y)
    e0 = np.zeros(frame.dim)
    e0[0] = 1.0
    w = tc.einsum("n,k->nk", Y, ay) * (0.3 / s2) + np.eye(frame.dim) * (1.0 + 0.2 * X[0] * X[1])
    return w + tc.einsum("n,k->nk", Y, e0 * 1.0) * (0.1 * X[-1] / tc.sqrt(s2))


def commutator_law(frame: Frame, w=None) -> float:
    """[T_i, T_j] w = M^h_ij S_h w - rho_k^h_ij w^n_h + rho_h^n_ij w^h_k."""
    w = probe_tensor(frame) if w is None else w
    Tw = frame.covariant(w, "ul", "T")                               # [n, k, j]
    TTw = tc.value(frame.covariant(Tw, "ulL", "T"))                   # [n, k, j, i]
    lhs = TTw.transpose(0, 1, 3, 2) - TTw                             # [n, k, i, j]
    wv = tc.value(w)
    Cu = tc.value(frame.C_up)
    Sw = (tc.value(w.grad(frame.yv)) + np.einsum("nhs,sk->nkh", Cu, wv)
          - np.einsum("mhk,nm->nkh", Cu, wv))                        # [n, k, h]
    M = m_closed(frame)
    rho = tc.value(rho_closed(frame, M))
    rhs = (np.einsum("hij,nkh->nkij", tc.value(M), Sw) - np.einsum("khij,nh->nkij", rho, wv)
           + np.einsum("hnij,hk->nkij", rho, wv))
    return float(np.abs(lhs - rhs).max())
