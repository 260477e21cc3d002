"""Two-vector angles, the indicatrix chart, horizontal transport and coincidence limits."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from . import tensor_core as tc
from .connection import Frame
from .finsler_core import Inadmissible, fiber_from_energy, sample
from .riemann_base import linear_connection

LAMBDA_SLACK = 1e-12


class GeodesicFailure(RuntimeError):
    """The discrete geodesic optimizer did not converge."""


def _value_field(space, x, y, fn):
    return np.asarray(tc.value(fn(np.asarray(x, float), np.asarray(y, float))), float)


def _clamped_lambda(lam):
    lam = np.asarray(lam, float)
    if np.any(np.abs(lam) > 1.0 + LAMBDA_SLACK):
        raise ValueError(f"cosine {lam} outside [-1, 1] beyond rounding")
    return np.clip(lam, -1.0, 1.0)


def closed_angle(space, x, y1, y2) -> float:
    """alpha = arccos(a(U1, U2)) / H."""
    for y in (y1, y2):
        if not space.admissible(x, y):
            raise Inadmissible(f"inadmissible vector {y}")
    a = np.asarray(tc.value(space.field.a(np.asarray(x, float))))
    U1 = _value_field(space, x, y1, space.unit_field)
    U2 = _value_field(space, x, y2, space.unit_field)
    H = float(tc.value(space.H(np.asarray(x, float))))
    return float(np.arccos(_clamped_lambda(U1 @ a @ U2)) / H)


# the squared angle through a series that stays smooth at coincidence

def _acos_sq_coeffs(terms: int = 40):
    """arccos(1 - z)^2 = 2 sum_n (2z)^n / (n^2 binom(2n, n))."""
    c = [0.0]
    for n in range(1, terms + 1):
        c.append(2.0 * 2.0 ** n / (n * n * math.comb(2 * n, n)))
    return c


_ACOS_SQ = _acos_sq_coeffs()


def _acos_sq(z):
    out = 0.0 * z + _ACOS_SQ[-1]
    for c in reversed(_ACOS_SQ[:-1]):
        out = out * z + c
    return out


def angle_energy(space, x, y1, y2):
    """E = alpha^2 / 2 as a smooth function of (y1, y2); jets allowed."""
    a = space.field.a(x)
    U1 = space.unit_field(x, y1)
    U2 = space.unit_field(x, y2)
    H = space.H(x)
    lam = tc.einsum("i,ij,j->", U1, a, U2)
    return _acos_sq(1.0 - lam) / (2.0 * H * H)


# discrete geodesic oracle

@dataclass
class GeodesicResult:
    angle: float
    lengths: dict = field(default_factory=dict)       # segments -> converged length
    history: list = field(default_factory=list)       # (energy, length) per accepted step, final level
    converged: bool = True

    @property
    def cauchy(self) -> float:
        ks = sorted(self.lengths)
        return abs(self.lengths[ks[-1]] - self.lengths[ks[-2]]) if len(ks) > 1 else float("inf")


def _batch_fiber(space, x, P):
    """F, g and C at a batch of points P[k, :]."""
    n = P.shape[-1]
    Y = tc.basis(n, 3).seed(P)
    F = space.metric(x, Y)
    _, g, C = fiber_from_energy(0.5 * F * F, list(range(n)))
    return tc.value(F), tc.value(g), tc.value(C)


def _path_length(V, space, x, ends, energy=False, seen=None):
    """Length of the projected polyline and its gradient in the free vertices V.

    Segment lengths use the mean of g at the two projected ends.  With
    ``energy`` the objective is segments * sum(s_k^2) instead: same minimizing
    path, but no vertex-sliding degeneracy, so L-BFGS converges.
    """
    n = ends[0].shape[0]
    W = np.vstack([ends[0], V.reshape(-1, n), ends[1]])
    Fw = np.asarray(tc.value(space.metric(x, W)), float)
    P = W / Fw[:, None]
    _, g, C = _batch_fiber(space, x, P)
    D = P[1:] - P[:-1]
    G = 0.5 * (g[1:] + g[:-1])
    GD = np.einsum("kmn,kn->km", G, D)
    s = np.sqrt(np.einsum("km,km->k", GD, D))
    if np.any(s <= 0):
        return float(np.sum(s)), np.zeros_like(V)
    w = 2 * s.shape[0] * s if energy else np.ones_like(s)
    # dg/dy = 2C
    CDD0 = np.einsum("kmnj,km,kn->kj", C[:-1], D, D)
    CDD1 = np.einsum("kmnj,km,kn->kj", C[1:], D, D)
    gP = np.zeros_like(P)
    gP[:-1] += w[:, None] * (-2 * GD + CDD0) / (2 * s[:, None])
    gP[1:] += w[:, None] * (2 * GD + CDD1) / (2 * s[:, None])
    # chain through P = W / F(W): dP/dW = (I - P l_low) / F(W)
    l_low = np.einsum("kmn,kn->km", g, P)
    gW = (gP - np.einsum("ki,ki->k", gP, P)[:, None] * l_low) / Fw[:, None]
    f = s.shape[0] * float(s @ s) if energy else float(np.sum(s))
    if seen is not None:
        seen[V.tobytes()] = (f, float(np.sum(s)))
    return f, gW[1:-1].ravel()


def _refine(space, x, V, ends):
    n = ends[0].shape[0]
    W = np.vstack([ends[0], V.reshape(-1, n), ends[1]])
    W = W / np.asarray(tc.value(space.metric(x, W)), float)[:, None]
    mid = 0.5 * (W[1:] + W[:-1])
    out = np.empty((2 * W.shape[0] - 1, n))
    out[0::2] = W
    out[1::2] = mid
    return out[1:-1].ravel()


def geodesic_angle(space, x, y1, y2, segments: int = 400, start: int = 25,
                   strict: bool = True) -> GeodesicResult:
    """Length of the shortest polyline on {F(x, .) = 1} between the rays of y1 and y2.

    Vertices live in the ambient space and are projected radially.  The
    discrete energy is minimized with L-BFGS, doubling the segment count from
    ``start`` up to ``segments`` and seeding each level with the previous path.
    """
    x = np.asarray(x, float)
    y1, y2 = np.asarray(y1, float), np.asarray(y2, float)
    for y in (y1, y2):
        if not space.admissible(x, y):
            raise Inadmissible(f"inadmissible endpoint {y}")
    l1 = y1 / float(tc.value(space.metric(x, y1)))
    l2 = y2 / float(tc.value(space.metric(x, y2)))
    if np.allclose(l1, l2, rtol=0, atol=1e-15):
        return GeodesicResult(angle=0.0, lengths={segments: 0.0})
    ends = (l1, l2)
    k = min(start, segments)
    s = np.linspace(0, 1, k + 1)[1:-1, None]
    V = ((1 - s) * l1 + s * l2).ravel()
    result = GeodesicResult(angle=float("nan"))
    while True:
        final = k >= segments
        seen, trace = {}, []

        def record(v):
            if final and v.tobytes() in seen:
                trace.append(seen[v.tobytes()])
            seen.clear()

        opt = minimize(_path_length, V, args=(space, x, ends, True, seen), jac=True,
                       method="L-BFGS-B", callback=record,
                       options={"maxiter": 5000, "gtol": 1e-8, "maxcor": 30,
                                "ftol": 1e-15 if final else 1e-11})
        if not opt.success and "ABNORMAL" not in str(opt.message):
            result.converged = False
            if strict:
                raise GeodesicFailure(f"{k} segments: {opt.message}")
        V = opt.x
        result.lengths[k] = _path_length(V, space, x, ends)[0]
        if final:
            result.history = trace
            break
        V = _refine(space, x, V, ends)
        k = min(2 * k, segments)
    result.angle = result.lengths[k]
    return result


# indicatrix chart

@dataclass(frozen=True)
class IndicatrixChart:
    anchor: np.ndarray
    frame: np.ndarray          # tangent directions E[:, a]
    t_a: np.ndarray            # t^m_a at the anchor
    t_ab: np.ndarray           # t^m_{ab}
    u_m: np.ndarray            # u^a_m = du^a/dy^m at the anchor
    metric: np.ndarray         # i_ab
    christoffel: np.ndarray    # i^c_ab as [c, a, b]
    curvature: np.ndarray      # I_a^e_bd as [a, e, b, d]
    S: np.ndarray              # S_abcd
    sectional: float
    sectional_residual: float


def _tangent_basis(l_low, h):
    """Columns spanning ker(l_low), orthonormal with respect to h."""
    n = l_low.shape[0]
    E = np.linalg.svd(l_low[None, :])[2][1:].T               # n x (n-1)
    gram = E.T @ h @ E
    w, Q = np.linalg.eigh(gram)
    if np.min(w) <= 1e-12:
        raise ValueError("degenerate indicatrix chart")
    return E @ Q / np.sqrt(w)


def indicatrix_chart(space, x, anchor) -> IndicatrixChart:
    """Radial chart t(u) = w(u) / F(x, w(u)), w = l0 + E u, at the anchor direction.

    With phi(u) = F(x, w(u)) and w affine in u the induced metric is
    i_ab = phi_ab / phi, so the whole chart is one jet over the N-1 chart variables.
    """
    x = np.asarray(x, float)
    fs = sample(space, x, anchor)
    l0 = fs.l_up
    n = l0.shape[0]
    E = _tangent_basis(fs.l_low, fs.h)
    m = n - 1
    b = tc.basis(m, 4)
    u = b.seed(np.zeros(m))
    uv = list(range(m))
    w = tc.einsum("ma,a->m", E, u) + l0
    phi = space.metric(x, w)
    metric_jet = phi.grad(uv).grad(uv) / phi
    t = w / phi
    i_ab = tc.value(metric_jet)
    iinv = np.linalg.inv(i_ab)
    di = metric_jet.grad(uv)                                   # [a, b, c] = d_c i_ab
    lowered = 0.5 * (tc.einsum("ebc->ebc", di) + tc.einsum("ecb->ebc", di) - tc.einsum("bce->ebc", di))
    iinv_j = tc.inv(metric_jet)
    gamma = tc.einsum("ce,eab->cab", iinv_j, lowered)          # i^c_ab
    dgamma = gamma.grad(uv)                                    # [e, a, b, d]
    G = tc.value(gamma)
    dG = tc.value(dgamma)
    I = (np.einsum("eabd->aebd", dG) - np.einsum("eadb->aebd", dG)
         + np.einsum("fab,efd->aebd", G, G) - np.einsum("fad,efb->aebd", G, G))
    I_low = np.einsum("aebd,ec->acbd", I, i_ab)                # I_acbd
    S = -(I_low.transpose(0, 2, 1, 3) + np.einsum("adbc->abcd", I_low)) / 3.0
    # I_acbd = K (i_ab i_cd - i_ad i_bc) for constant curvature K
    form = np.einsum("ab,cd->acbd", i_ab, i_ab) - np.einsum("ad,bc->acbd", i_ab, i_ab)
    K = float(np.sum(I_low * form) / np.sum(form * form))
    t_a = tc.value(t.grad(uv))
    t_ab = tc.value(t.grad(uv).grad(uv))
    # u(y) inverts the radial chart: y is proportional to l0 + E u
    dual = np.linalg.inv(np.column_stack([l0, E]))             # rows: l0*, E*
    u_m = dual[1:]
    return IndicatrixChart(anchor=l0, frame=E, t_a=t_a, t_ab=t_ab, u_m=u_m, metric=i_ab,
                           christoffel=G, curvature=I, S=S, sectional=K,
                           sectional_residual=float(np.linalg.norm(I_low - K * form)))


def chart_residuals(space, x, chart: IndicatrixChart) -> dict[str, float]:
    fs = sample(space, x, chart.anchor)
    F = fs.F
    i_ab, t_a, t_ab, u_m = chart.metric, chart.t_a, chart.t_ab, chart.u_m
    iinv = np.linalg.inv(i_ab)
    G = chart.christoffel
    Cterm = F * np.einsum("mnk,ma,nb,ke,ec->cab", fs.C, t_a, t_a, t_a, iinv)
    t_ab_rep = np.einsum("ic,cab->iab", t_a, G - Cterm) - np.einsum("i,ab->iab", fs.l_up, i_ab)
    S = chart.S
    I_low = np.einsum("aebd,ec->acbd", chart.curvature, i_ab)
    res = {
        "induced_metric": np.abs(i_ab - np.einsum("mn,ma,nb->ab", fs.h, t_a, t_a)).max(),
        "normal_second": np.abs(np.einsum("m,mab->ab", fs.l_low, t_ab) + i_ab).max(),
        "dual_projection": np.abs(F * u_m @ t_a - np.eye(i_ab.shape[0])).max(),
        "h_projection": np.abs(F * t_a @ u_m - np.eye(len(fs.l_up))
                               + np.outer(fs.l_up, fs.l_low)).max(),
        "second_projection": np.abs(t_ab - t_ab_rep).max(),
        "S_identity": np.abs(S - S.transpose(0, 2, 1, 3) + np.einsum("adbc->abcd", I_low)).max(),
    }
    return {k: float(v) for k, v in res.items()}


# horizontal transport

def line_curve(x0, x1):
    x0, x1 = np.asarray(x0, float), np.asarray(x1, float)
    d = x1 - x0
    return lambda s: (x0 + s * d, d)


def bent_curve(x0, direction, bend=0.2):
    """x(s) = x0 + s v + bend sin(pi s) w with w orthogonal to v."""
    x0 = np.asarray(x0, float)
    v = np.asarray(direction, float)
    w = np.roll(v, 1) - (np.roll(v, 1) @ v) / (v @ v) * v
    w = w / np.linalg.norm(w) if np.linalg.norm(w) > 0 else w
    return lambda s: (x0 + s * v + bend * np.sin(np.pi * s) * w,
                      v + bend * np.pi * np.cos(np.pi * s) * w)


def _fields(space, x, y):
    if hasattr(space, "fields"):
        return space.fields(x, y)
    return space.metric(x, y), space.unit_field(x, y)


def n_batch(space, x, ys) -> np.ndarray:
    """N^m_n at several y with first-order jets; returns [batch, m, n]."""
    x = np.asarray(x, float)
    ys = np.atleast_2d(np.asarray(ys, float))
    n = x.shape[0]
    b = tc.basis(2 * n, 1)
    X, Y = b.seed(x, 0), b.seed(ys, n)
    xv, yv = list(range(n)), list(range(n, 2 * n))
    F, U = _fields(space, X, Y)
    H = float(tc.value(space.H(x)))
    ybar = U * tc.exp(H * tc.log(F))[..., None]
    t = np.stack([ybar.partial(v) for v in yv], axis=-1)
    dxU = np.stack([U.partial(v) for v in xv], axis=-1)
    dxF = np.stack([F.partial(v) for v in xv], axis=-1)
    Fv, Uv = tc.value(F), tc.value(U)
    L = linear_connection(space.field, x)
    drive = dxU + np.einsum("ink,bk->bin", L, Uv)
    yinv = np.linalg.inv(t)
    return (-np.einsum("bm,bn->bmn", ys / Fv[:, None], dxF)
            - np.einsum("bmi,bin->bmn", yinv, drive) * (Fv ** H)[:, None, None])


@dataclass
class TransportState:
    s: np.ndarray
    x: np.ndarray
    y1: np.ndarray
    y2: np.ndarray
    F1: np.ndarray
    F2: np.ndarray
    alpha: np.ndarray
    H: np.ndarray
    H_alpha: np.ndarray
    dalpha_ds: np.ndarray
    rhs: np.ndarray

    def drift(self) -> dict[str, float]:
        return {
            "F1": float(np.ptp(self.F1)),
            "F2": float(np.ptp(self.F2)),
            "H_alpha": float(np.ptp(self.H_alpha)),
            "alpha": float(np.ptp(self.alpha)),
            "recurrence": float(np.max(np.abs(self.dalpha_ds - self.rhs)[1:-1])),
        }

    def rows(self):
        for k in range(len(self.s)):
            yield (self.s[k], self.F1[k], self.F2[k], self.alpha[k], self.H[k], self.H_alpha[k],
                   self.dalpha_ds[k], self.rhs[k])


TRACE_HEADER = ("s", "F1", "F2", "alpha", "H", "H_alpha", "dalpha_ds", "rhs")


def _h_grad(space, x):
    X = tc.basis(x.shape[0], 1).seed(x)
    H = space.H(X)
    if not tc.is_jet(H):
        return float(H), np.zeros_like(x)
    return float(H.value), tc.value(H.grad(list(range(x.shape[0]))))


def horizontal_transport(space, curve: Callable, y_pair, steps: int = 1000,
                         length: float = 1.0) -> TransportState:
    """RK4 for dy^k/ds = N^k_i(x, y) xdot^i applied to both vectors of the pair."""
    Y = np.array(y_pair, float)

    def rhs(s, Y):
        x, xdot = curve(s)
        for y in Y:
            if not space.admissible(x, y):
                raise Inadmissible(f"vector left the admissible cone at s={s}")
        return np.einsum("bki,i->bk", n_batch(space, x, Y), xdot)

    ds = length / steps
    ss = np.linspace(0.0, length, steps + 1)
    traj = [Y.copy()]
    for k in range(steps):
        s = ss[k]
        k1 = rhs(s, Y)
        k2 = rhs(s + ds / 2, Y + ds / 2 * k1)
        k3 = rhs(s + ds / 2, Y + ds / 2 * k2)
        k4 = rhs(s + ds, Y + ds * k3)
        Y = Y + ds / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        traj.append(Y.copy())
    traj = np.array(traj)
    xs = np.array([curve(s)[0] for s in ss])
    F = np.empty((len(ss), 2))
    alpha, H, Hdot = (np.empty(len(ss)) for _ in range(3))
    for k, (s, x) in enumerate(zip(ss, xs)):
        Fk, Uk = (np.asarray(tc.value(q), float) for q in _fields(space, x, traj[k]))
        H[k], H_grad = _h_grad(space, x)
        a = np.asarray(tc.value(space.field.a(x)))
        F[k] = Fk
        alpha[k] = np.arccos(_clamped_lambda(Uk[0] @ a @ Uk[1])) / H[k]
        Hdot[k] = H_grad @ curve(s)[1]
    F1, F2 = F[:, 0], F[:, 1]
    dalpha = np.gradient(alpha, ss, edge_order=2)
    return TransportState(s=ss, x=xs, y1=traj[:, 0], y2=traj[:, 1], F1=F1, F2=F2, alpha=alpha,
                          H=H, H_alpha=H * alpha, dalpha_ds=dalpha, rhs=-Hdot / H * alpha)


# coincidence limits

def _richardson(values, eps):
    """Extrapolate f(eps) = f0 + c1 eps + c2 eps^2 to eps = 0 (Neville)."""
    eps = np.asarray(eps, float)
    table = [np.asarray(v, float) for v in values]
    k = len(table)
    for level in range(1, k):
        table = [(eps[i + level] * table[i] - eps[i] * table[i + 1]) / (eps[i + level] - eps[i])
                 for i in range(len(table) - 1)]
    return table[0]


def energy_derivatives(space, x, y1, y2):
    """Derivatives of E up to third order in (y1, y2); variables 0..N-1 are y1."""
    x = np.asarray(x, float)
    n = x.shape[0]
    b = tc.basis(2 * n, 3)
    Y1, Y2 = b.seed(y1, 0), b.seed(y2, n)
    E = angle_energy(space, x, Y1, Y2)
    v1, v2 = list(range(n)), list(range(n, 2 * n))
    grad = E.grad(v1 + v2)
    hess = grad.grad(v1 + v2)
    third = hess.grad(v1 + v2)
    return tc.value(grad), tc.value(hess), tc.value(third)


@dataclass(frozen=True)
class CoincidenceLimits:
    gradient: np.ndarray
    hessian: np.ndarray
    third: np.ndarray


def coincidence_limits(space, x, y, eps=(1e-2, 5e-3, 2.5e-3), seed: int = 7) -> CoincidenceLimits:
    """Derivatives of E at y2 = y + eps F(y) delta, extrapolated to eps = 0."""
    rng = np.random.default_rng(seed)
    y = np.asarray(y, float)
    F = float(tc.value(space.metric(np.asarray(x, float), y)))
    delta = rng.normal(size=y.shape)
    delta /= np.linalg.norm(delta)
    vals = [energy_derivatives(space, x, y, y + e * F * delta) for e in eps]
    return CoincidenceLimits(*(_richardson([v[k] for v in vals], eps) for k in range(3)))


def coincidence_check(space, x, y, frame: Frame | None = None) -> dict[str, float]:
    """The h-tensor law from differentiating the preservation law, and E-limits."""
    frame = frame or Frame(space, x, y)
    F, H, H_i, h, l_low, N, C = frame.values("F", "H", "H_i", "h", "l_low", "N", "C")
    dxF = tc.value(frame.F.grad(frame.xv))
    dF = dxF + l_low @ N
    Dh = tc.value(frame.covariant(frame.h, "ll", "D"))
    law = Dh - 2 / F * np.einsum("mn,i->mni", h, dF) + 2 / H * np.einsum("mn,i->mni", h, H_i)

    lim = coincidence_limits(space, x, y)
    exact = CoincidenceLimits(*energy_derivatives(space, x, y, y))
    out = {"h_law": float(np.abs(law).max())}
    for tag, d in (("", lim), ("exact_", exact)):
        out.update({tag + k: v for k, v in _limit_residuals(d, h, l_low, C, F, frame.dim).items()})
    return out


def _limit_residuals(lim: CoincidenceLimits, h, l_low, C, F, n) -> dict[str, float]:
    target = h / F ** 2
    H2 = lim.hessian
    # d3E / dy2^k dy1^m dy1^n and, with the roles swapped, d3E / dy1^k dy2^m dy2^n
    e211 = lim.third[n:, :n, :n]
    e122 = lim.third[:n, n:, n:]
    rep = ((np.einsum("nk,m->kmn", h, l_low) + np.einsum("mk,n->kmn", h, l_low)) / F ** 3
           - C / F ** 2)
    return {
        "gradient": float(np.abs(lim.gradient).max()),
        "hessian_11": float(np.abs(H2[:n, :n] - target).max()),
        "hessian_12": float(np.abs(H2[:n, n:] + target).max()),
        "hessian_22": float(np.abs(H2[n:, n:] - target).max()),
        "third_211": float(np.abs(e211 - rep).max()),
        "third_122": float(np.abs(e122 - rep).max()),
    }
