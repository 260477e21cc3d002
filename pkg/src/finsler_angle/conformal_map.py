"""The fiberwise conformal deformation ybar = F^H U and its Jacobians.

Layouts: ``t[i, n]`` is t^i_n = d ybar^i / d y^n, ``yinv[m, i]`` is y^m_i,
``t2[h, n, u]`` is t^h_{nu}.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor_core as tc
from .finsler_core import FinslerSample, Inadmissible, fiber_from_energy


@dataclass(frozen=True)
class DeformationSample:
    ybar: np.ndarray
    S: float
    p: float
    F: float
    H: float
    t: np.ndarray
    yinv: np.ndarray
    t2: np.ndarray
    C: np.ndarray          # C^i_m = p t^i_m
    C_rec: np.ndarray      # C-tilde^n_m = y^n_m / p
    dC: np.ndarray         # dC^i_m / dy^n as [i, m, n]
    a: np.ndarray
    fiber: FinslerSample


def deform(space, x, y) -> DeformationSample:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if not space.admissible(x, y):
        raise Inadmissible(f"inadmissible point x={x}, y={y}")
    n = y.shape[0]
    b = tc.basis(n, 3)
    Y = b.seed(y)
    yv = list(range(n))
    F = space.metric(x, Y)
    H = float(tc.value(space.H(x)))
    ybar = space.deform(x, Y)
    t = ybar.grad(yv)
    t_v = tc.value(t)
    try:
        yinv = tc.invert(t_v)
    except np.linalg.LinAlgError as exc:
        raise Inadmissible("singular deformation Jacobian") from exc
    p = tc.exp((1.0 - H) * tc.log(F)) / H
    C = p * t
    a = np.asarray(tc.value(space.field.a(x)))
    y_low, g, Cc = (tc.value(q) for q in fiber_from_energy(0.5 * F * F, yv))
    Fv = float(F.value)
    ginv = tc.invert(g)
    l_low = y_low / Fv
    fs = FinslerSample(F=Fv, l_up=y / Fv, l_low=l_low, y_low=y_low, g=g, ginv=ginv, C=Cc,
                       C_up=np.einsum("kh,hij->kij", ginv, Cc), h=g - np.outer(l_low, l_low))
    yb = tc.value(ybar)
    return DeformationSample(
        ybar=yb, S=float(np.sqrt(yb @ a @ yb)), p=float(p.value), F=Fv, H=H, t=t_v, yinv=yinv,
        t2=tc.value(t.grad(yv)), C=tc.value(C), C_rec=yinv / float(p.value),
        dC=tc.value(C.grad(yv)), a=a, fiber=fs,
    )


def pullback_metric(d: DeformationSample) -> np.ndarray:
    """p^2 t^i_m t^j_n a_ij."""
    return d.p ** 2 * d.t.T @ d.a @ d.t


def _inverse_second(d: DeformationSample) -> np.ndarray:
    """y^k_{hp} from y^k_{hp} t^p_n = -y^k_p t^p_{nv} y^v_h; layout [k, h, p]."""
    rhs = -np.einsum("kp,pnv,vh->khn", d.yinv, d.t2, d.yinv)
    return np.einsum("khn,np->khp", rhs, d.yinv)


def jacobian_identities(d: DeformationSample) -> dict[str, float]:
    """Residuals of the contraction identities satisfied by the Jacobians."""
    fs, H, F = d.fiber, d.H, d.F
    t_low = d.a @ d.ybar
    n = fs.dim
    res = {
        "euler": np.abs(d.t @ fs.l_up * F - H * d.ybar).max(),
        "inverse": np.abs(d.yinv @ d.t - np.eye(n)).max(),
        "covector_inverse": np.abs(fs.y_low @ d.yinv - F ** (2 * (1 - H)) / H * t_low).max(),
        "covector_forward": np.abs(t_low @ d.t - H * F ** (2 * (H - 1)) * fs.y_low).max(),
        "second_contraction": np.abs(np.einsum("h,hni->ni", t_low, d.t2)
                                     - H * (1 - H) * F ** (2 * (H - 1))
                                     * (fs.g - 2 * np.outer(fs.l_low, fs.l_low))).max(),
        "angular_second": np.abs(d.p ** 2 * np.einsum("imk,j,ij->km", d.t2, d.ybar, d.a)
                                 - (1 / H - 1) * (fs.h - np.outer(fs.l_low, fs.l_low))).max(),
        "lowered_inverse": np.abs(fs.g @ d.yinv - d.p ** 2 * d.t.T @ d.a).max(),
        "inverse_second": np.abs(np.einsum("khp,pn->khn", _inverse_second(d), d.t)
                                 + np.einsum("kp,pnv,vh->khn", d.yinv, d.t2, d.yinv)).max(),
    }
    return {k: float(v) for k, v in res.items()}


@dataclass(frozen=True)
class DeformationTensor:
    C: np.ndarray
    C_rec: np.ndarray
    unholonomy: np.ndarray


def deformation_tensor(d: DeformationSample) -> DeformationTensor:
    """C^i_m, its reciprocal and dC^i_m/dy^n - dC^i_n/dy^m."""
    return DeformationTensor(C=d.C, C_rec=d.C_rec, unholonomy=d.dC - d.dC.transpose(0, 2, 1))


def deformation_identities(d: DeformationSample) -> dict[str, float]:
    fs = d.fiber
    n = fs.dim
    return {
        "pullback": float(np.abs(d.C.T @ d.a @ d.C - fs.g).max()),
        "reciprocal": float(np.abs(d.C @ d.C_rec - np.eye(n)).max()),
        "contraction": float(np.abs(d.C @ (fs.l_up * d.F) - d.F ** (1 - d.H) * d.ybar).max()),
        "norm": float(abs(d.S - d.F ** d.H)),
        "multiplier": float(abs(d.p - d.F ** (1 - d.H) / d.H)),
    }


def cartan_via_map(d: DeformationSample) -> dict[str, float]:
    """Cartan tensor and its trace rebuilt from the deformation."""
    fs, H, F = d.fiber, d.H, d.F
    n = fs.dim
    l, g = fs.l_low, fs.g
    geo = (1 - H) * (np.einsum("k,mn->mnk", l, g) + np.einsum("n,mk->mnk", l, g)
                     - np.einsum("m,nk->mnk", l, g)) / F
    rep = geo + d.p ** 2 * np.einsum("im,jnk,ij->mnk", d.t, d.t2, d.a)
    skew = ((1 - H) * 2 / F * (np.einsum("k,mn->kmn", l, g) - np.einsum("m,kn->kmn", l, g))
            + d.p ** 2 * (np.einsum("im,jnk,ij->kmn", d.t, d.t2, d.a)
                          - np.einsum("ik,jnm,ij->kmn", d.t, d.t2, d.a)))
    C_up_trace = np.einsum("mh,nk,hnk->m", fs.ginv, fs.ginv, fs.C)
    trace_rep = (-(n - 2) * (1 - H) * fs.l_up
                 + F * np.einsum("nk,ink,mi->m", fs.ginv, d.t2, d.yinv)) / F
    lowered_trace = np.einsum("nk,mnk->m", fs.ginv, fs.C)
    lowered_rep = (-(n - 2) * (1 - H) * l
                   + F * d.p ** 2 * np.einsum("nk,ink,jm,ij->m", fs.ginv, d.t2, d.t, d.a)) / F
    return {
        "cartan": float(np.abs(fs.C - rep).max()),
        "skew": float(np.abs(skew).max()),
        "trace_up": float(np.abs(C_up_trace - trace_rep).max()),
        "trace_low": float(np.abs(lowered_trace - lowered_rep).max()),
    }


def unit_correspondence(space, x, y) -> float:
    """g(x, l) dl dl = a dL dL / H^2 for indicatrix-tangent displacements of l.

    Each displacement dl is pushed through the Jacobian at l to give dL; the
    worst relative mismatch over a tangent basis is returned.
    """
    d = deform(space, x, y)
    unit = deform(space, x, d.fiber.l_up)
    dl_basis = np.linalg.svd(unit.fiber.l_low[None, :])[2][1:]   # rows annihilated by l_low
    worst = 0.0
    for dl in dl_basis:
        dL = unit.t @ dl
        lhs = dl @ unit.fiber.g @ dl
        rhs = dL @ unit.a @ dL / unit.H ** 2
        worst = max(worst, abs(lhs - rhs) / abs(lhs))
    return float(worst)
