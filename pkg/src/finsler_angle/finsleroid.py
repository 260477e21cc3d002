"""The Finsleroid metric K = sqrt(B) exp(-g chi / 2) and its closed forms.

Every function below accepts plain arrays or jets for ``x`` and ``y``; ``y``
may carry leading batch axes.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import tensor_core as tc
from .finsler_core import FinslerSample, Inadmissible
from .riemann_base import RiemannField, finsleroid_h

ADMISSIBLE_FLOOR = 1e-3
CHARGE_STEP = 1e-5


def _outer(s, v):
    """s[...] * v[...i] with s batch-shaped and v a vector."""
    return tc.einsum("...,...i->...i", s, v)


@dataclass
class FinsleroidScalars:
    b: object
    q: object
    v: object
    B: object
    L: object
    A: object
    f: object
    chi: object
    J: object
    K: object
    h: object
    G: object
    g: object


class FinsleroidSpace:
    """Finsleroid space over a :class:`RiemannField` whose charge is g(x)."""

    def __init__(self, field: RiemannField, name: str = "finsleroid"):
        self.field = field
        self.dim = field.dim
        self.name = name

    # base ingredients
    def base(self, x):
        a = self.field.a(x)
        ainv = tc.inv(a)
        b_low = self.field.b(x)
        b_up = tc.einsum("ij,j->i", ainv, b_low)
        return a, ainv, b_low, b_up

    def scalars(self, x, y, base=None) -> FinsleroidScalars:
        a, ainv, b_low, b_up = self.base(x) if base is None else base
        g = self.field.g(x)
        h = finsleroid_h(g)
        bb = tc.einsum("i,...i->...", b_low, y)
        s2 = tc.einsum("...i,ij,...j->...", y, a, y)
        q = tc.sqrt(s2 - bb * bb)
        B = bb * bb + g * bb * q + q * q
        A = bb + 0.5 * g * q
        f = tc.atan2(h * q, A)
        chi = f / h
        J = tc.exp(-0.5 * g * chi)
        K = tc.sqrt(B) * J
        v = y - _outer(bb, b_up)
        return FinsleroidScalars(b=bb, q=q, v=v, B=B, L=q + 0.5 * g * bb, A=A, f=f, chi=chi,
                                 J=J, K=K, h=h, G=g / h, g=g)

    # FinslerSpace contract
    def metric(self, x, y):
        return self.scalars(x, y).K

    def H(self, x):
        return finsleroid_h(self.field.g(x))

    def unit_field(self, x, y):
        """U^i = [h v^i + (b + g q / 2) b^i] / sqrt(B)."""
        s = self.scalars(x, y)
        _, _, _, b_up = self.base(x)
        num = s.h * s.v + _outer(s.b + 0.5 * s.g * s.q, b_up)
        return num / tc.sqrt(s.B)[..., None]

    def fields(self, x, y):
        """(F, U) from a single pass over the scalars."""
        base = self.base(x)
        s = self.scalars(x, y, base)
        num = s.h * s.v + _outer(s.b + 0.5 * s.g * s.q, base[3])
        return s.K, num / tc.sqrt(s.B)[..., None]

    def deform(self, x, y):
        """ybar = K^h U."""
        s = self.scalars(x, y)
        _, _, _, b_up = self.base(x)
        num = s.h * s.v + _outer(s.b + 0.5 * s.g * s.q, b_up)
        scale = tc.exp(s.h * tc.log(s.K)) / tc.sqrt(s.B)
        return num * scale[..., None]

    def admissible(self, x, y) -> bool:
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        g = float(tc.value(self.field.g(x)))
        if not abs(g) < 2.0:
            return False
        a, _, b_low, _ = (np.asarray(tc.value(t)) for t in self.base(x))
        bb = b_low @ y
        q2 = y @ a @ y - bb * bb
        if q2 <= 0:
            return False
        return bool(np.sqrt(q2) / np.sqrt(bb * bb + q2) >= ADMISSIBLE_FLOOR)

    def shifted(self, delta: float) -> "FinsleroidSpace":
        """Same space with the charge shifted by a constant (for d/dg checks)."""
        charge = self.field.charge
        return FinsleroidSpace(replace(self.field, charge=lambda x: charge(x) + delta), self.name)


def _check(space, x, y):
    if not space.admissible(x, y):
        raise Inadmissible(f"inadmissible Finsleroid point x={x}, y={y}")


def scalars(space: FinsleroidSpace, x, y) -> FinsleroidScalars:
    _check(space, x, y)
    s = space.scalars(np.asarray(x, float), np.asarray(y, float))
    return FinsleroidScalars(**{k: tc.value(v) for k, v in s.__dict__.items()})


def covector(space: FinsleroidSpace, x, y) -> np.ndarray:
    """y_i = (u_i + g q b_i) J^2."""
    s = scalars(space, x, y)
    a, _, b_low, _ = (tc.value(t) for t in space.base(np.asarray(x, float)))
    return (a @ y + s.g * s.q * b_low) * s.J ** 2


def u_field(space: FinsleroidSpace, x, y) -> np.ndarray:
    _check(space, x, y)
    return tc.value(space.unit_field(np.asarray(x, float), np.asarray(y, float)))


@dataclass(frozen=True)
class CartanContraction:
    A_low: np.ndarray
    A_up: np.ndarray
    m_low: np.ndarray
    m_up: np.ndarray
    M_bar: float


def m_bar(s: FinsleroidScalars):
    """M-bar with dK^2/dg = M-bar K^2."""
    return -s.f / s.h ** 3 + s.G / (2 * s.h * s.B) * s.q ** 2 + s.b * s.q / (s.h ** 2 * s.B)


def cartan_contraction(space: FinsleroidSpace, x, y) -> CartanContraction:
    s = scalars(space, x, y)
    if s.q <= 0:
        raise Inadmissible("axis direction has no Cartan contraction")
    y = np.asarray(y, float)
    _, _, b_low, b_up = (tc.value(t) for t in space.base(np.asarray(x, float)))
    n = y.shape[0]
    y_low = covector(space, x, y)
    m_low = s.K / s.q * (b_low - s.b / s.K ** 2 * y_low)
    m_up = (s.q ** 2 * b_up - (s.b + s.g * s.q) * s.v) / (s.q * s.K)
    half = n * s.g / 2
    return CartanContraction(A_low=half * m_low, A_up=half * m_up, m_low=m_low, m_up=m_up,
                             M_bar=float(m_bar(s)))


def eta(space: FinsleroidSpace, x, y) -> np.ndarray:
    """eta^{kn} = a^{kn} - b^k b^n - v^k v^n / q^2."""
    s = scalars(space, x, y)
    _, ainv, _, b_up = (tc.value(t) for t in space.base(np.asarray(x, float)))
    return ainv - np.outer(b_up, b_up) - np.outer(s.v, s.v) / s.q ** 2


def _x_jets(space, x):
    x = np.asarray(x, float)
    X = tc.basis(x.shape[0], 1).seed(x)
    xv = list(range(x.shape[0]))
    field = space.field
    from .riemann_base import BaseJets
    base = BaseJets(field, X, xv)
    b_low = field.b(X)
    db = tc.value(b_low.grad(xv))          # db[j, i] = d_i b_j
    gamma = tc.value(base.gamma)
    nabla_b = db.T - np.einsum("kij,k->ij", gamma, tc.value(b_low))
    g = field.g(X)
    g_i = tc.value(g.grad(xv)) if tc.is_jet(g) else np.zeros(x.shape[0])
    return gamma, nabla_b, g_i


@dataclass(frozen=True)
class ExplicitConnection:
    N: np.ndarray
    N_I: np.ndarray
    N_breve_vec: np.ndarray
    g_i: np.ndarray


def breve_vector(s: FinsleroidScalars, cc: CartanContraction, y) -> np.ndarray:
    """N-breve^k = -(1/h^2)(q/B)(q + g b / 2)(K/(N g)) A^k - M-bar y^k / 2."""
    return -(s.q / (s.h ** 2 * s.B)) * (s.q + 0.5 * s.g * s.b) * (s.K / 2) * cc.m_up - 0.5 * cc.M_bar * y


def explicit_connection(space: FinsleroidSpace, x, y) -> ExplicitConnection:
    """N^k_i = N^I^k_i + N-breve^k g_i."""
    y = np.asarray(y, float)
    s = scalars(space, x, y)
    cc = cartan_contraction(space, x, y)
    _, _, _, b_up = (tc.value(t) for t in space.base(np.asarray(x, float)))
    gamma, nabla_b, g_i = _x_jets(space, x)
    et = eta(space, x, y)
    h = s.h
    coef_eta = s.b - (s.b + 0.5 * s.g * s.q) / h
    vec = s.v * (s.b - (s.b + s.g * s.q) / h) / s.q ** 2 + (1 / h - 1) * b_up
    bracket = coef_eta * et + np.outer(vec, y)              # [k, j]
    N_I = np.einsum("kj,ij->ki", bracket, nabla_b) - np.einsum("kij,j->ki", gamma, y)
    nb = breve_vector(s, cc, y)
    return ExplicitConnection(N=N_I + np.outer(nb, g_i), N_I=N_I, N_breve_vec=nb, g_i=g_i)


@dataclass(frozen=True)
class BreveDerivatives:
    first: np.ndarray    # [k, i, m]
    second: np.ndarray   # [k, i, m, n]


def breve_derivatives(space: FinsleroidSpace, x, y, fs: FinslerSample) -> BreveDerivatives:
    """Closed forms of dN-breve^k_i/dy^m and its next y-derivative."""
    y = np.asarray(y, float)
    s = scalars(space, x, y)
    cc = cartan_contraction(space, x, y)
    _, _, g_i = _x_jets(space, x)
    h2 = s.h ** 2
    r = s.q ** 2 / (2 * s.B)
    bq = s.b / s.q
    h_mix = fs.ginv @ fs.h                                     # h^k_m
    inner = (r / h2 * (1 + 0.5 * s.g * bq - 2 * h2) * np.outer(fs.l_up, cc.m_low)
             + r / h2 * (1 + 0.5 * s.g * bq) * (bq + s.g) * h_mix
             + r / h2 * (bq + 0.5 * s.g) * np.outer(cc.m_up, cc.m_low)
             - 0.5 * cc.M_bar * h_mix)                          # [k, m]
    nb = breve_vector(s, cc, y)
    first = np.einsum("km,i->kim", inner, g_i) + np.einsum("m,k,i->kim", fs.l_low, nb, g_i) / s.K
    # the A^k_mn / g term stays finite as g -> 0 because C is proportional to g
    second = (-s.g / (2 * h2) * np.einsum("i,mn,k->kimn", g_i, fs.h, fs.l_up) / s.K
              - np.einsum("i,kmn->kimn", g_i, fs.C_up) * (1 / (s.g * h2) if s.g != 0 else 0.0))
    return BreveDerivatives(first=first, second=second)


def cartan_rep(fs: FinslerSample, cc: CartanContraction) -> np.ndarray:
    """A_ijk = (1/N)[A_i h_jk + A_j h_ik + A_k h_ij - (4/(N^2 g^2)) A_i A_j A_k] via m."""
    n = fs.dim
    A, m, h = cc.A_low, cc.m_low, fs.h
    return (np.einsum("i,jk->ijk", A, h) + np.einsum("j,ik->ijk", A, h) + np.einsum("k,ij->ijk", A, h)
            - np.einsum("i,j,k->ijk", A, m, m)) / n


# closed-form identities of the inhomogeneous (g = g(x)) Finsleroid

def breve_field(space: FinsleroidSpace, x, y):
    """N-breve^k as a function of (x, y); jets allowed, so y-derivatives are exact."""
    base = space.base(x)
    s = space.scalars(x, y, base)
    b_up = base[3]
    bracket = _outer(s.q * s.q, b_up) - _outer(s.b + s.g * s.q, s.v)
    scale = -(s.q + 0.5 * s.g * s.b) / (2 * s.h * s.h * s.B)
    return _outer(scale, bracket) - _outer(0.5 * m_bar(s), y)


def _cartan_jet(space, x, y, order):
    """A_ijk = K C_ijk as a jet in y of the given order (value keeps order - 3)."""
    from .finsler_core import fiber_from_energy

    n = y.shape[0]
    Y = tc.basis(n, order).seed(y)
    K = space.metric(x, Y)
    _, _, C = fiber_from_energy(0.5 * K * K, list(range(n)))
    return K * C


def _h_grad(space, x):
    X = tc.basis(x.shape[0], 1).seed(x)
    h = space.H(X)
    return tc.value(h.grad(list(range(x.shape[0])))) if tc.is_jet(h) else np.zeros(x.shape[0])


def closed_form_residuals(space: FinsleroidSpace, x, y, fs: FinslerSample,
                       step: float = CHARGE_STEP) -> dict[str, float]:
    """Residuals of the y- and g-derivative identities behind the explicit connection.

    Keys ending in ``_g`` use central differences in the charge with ``step``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = y.shape[0]
    s = scalars(space, x, y)
    cc = cartan_contraction(space, x, y)
    _, _, g_i = _x_jets(space, x)
    h_i = _h_grad(space, x)
    K, q, B, b, g, h = s.K, s.q, s.B, s.b, s.g, s.h
    yv = list(range(n))

    # y-derivative of M-bar
    Y = tc.basis(n, 1).seed(y)
    dM = tc.value(m_bar(space.scalars(x, Y)).grad(yv))
    mbar_y = dM - 2 * q * q / B * 2 / (g * n * K) * cc.A_low

    # charge derivatives at fixed (x, y)
    up, down = space.shifted(step), space.shifted(-step)
    K2_g = (float(up.metric(x, y)) ** 2 - float(down.metric(x, y)) ** 2) / (2 * step)
    A_g = (tc.value(_cartan_jet(up, x, y, 3)) - tc.value(_cartan_jet(down, x, y, 3))) / (2 * step)
    A3 = tc.value(_cartan_jet(space, x, y, 3))
    A = cc.A_low
    AAA = np.einsum("j,m,n->mnj", A, A, A)
    A_g_rep = (1.5 * cc.M_bar * A3 + (1 / g - 2 * b * q / B) * A3
               - 2 * g * b * q / B / (g * n) * (2 / (g * n)) ** 2 * AAA)

    # y-derivatives of the breve coefficients from jets
    Yb = tc.basis(n, 3).seed(y)
    nb = breve_field(space, x, Yb)
    d1 = nb.grad(yv)
    d2 = tc.value(d1.grad(yv))                                   # [k, m, n]
    d1 = tc.value(d1)
    first_jet = np.einsum("km,i->kim", d1, g_i)
    second_jet = np.einsum("kmn,i->kimn", d2, g_i)
    closed = breve_derivatives(space, x, y, fs)

    # y-derivative of A_ijk against its representation
    dA = tc.value(_cartan_jet(space, x, y, 4).grad(yv))          # [i, j, k, n]
    m = cc.m_low
    Hc = fs.h - np.outer(m, m)
    l = fs.l_low

    def sym3(t):
        """t[i,j,k,n] + t with i,j,k cycled: sum over the three slots."""
        return t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)

    dA_rep = (2 / (n * K) * sym3(np.einsum("jkn,i->ijkn", A3, A))
              - sym3(np.einsum("j,kni->ijkn", l, A3)) / K
              + 2 / (n * n * K) * sym3(np.einsum("jk,i,n->ijkn", Hc, A, A))
              - g * b / (2 * K * q) * sym3(np.einsum("jk,in->ijkn", Hc, Hc)))

    y_low = fs.y_low
    res = {
        "mbar_y": np.abs(mbar_y).max(),
        "cartan_g": np.abs(A_g - A_g_rep).max(),
        "energy_g": abs(K2_g - cc.M_bar * K * K),
        "breve_contracted": np.abs(np.einsum("k,kimn->imn", y_low, closed.second)
                                   - 2 / h * np.einsum("i,mn->imn", h_i, fs.h)).max(),
        "breve_contracted_jet": np.abs(np.einsum("k,kimn->imn", y_low, second_jet)
                                       - 2 / h * np.einsum("i,mn->imn", h_i, fs.h)).max(),
        "breve_first": np.abs(first_jet - closed.first).max(),
        "breve_second": np.abs(second_jet - closed.second).max(),
        "cartan_y": np.abs(dA - dA_rep).max(),
        "cartan_rep": np.abs(cartan_rep(fs, cc) - A3).max(),
    }
    return {k: float(v) for k, v in res.items()}


def frame_residuals(frame) -> dict[str, float]:
    """Identities needing the full connection: D h and the third y-derivative of N."""
    F, H, H_i, h, l_up = frame.values("F", "H", "H_i", "h", "l_up")
    Dh = tc.value(frame.covariant(frame.h, "ll", "D"))
    A_up = frame.F * frame.C_up
    DA = tc.value(frame.covariant(A_up, "ull", "D"))              # [k, m, n, i]
    rep = (2 / H * np.einsum("i,k,mn->kimn", H_i, l_up, h) / F
           - np.einsum("kmni->kimn", DA) / F)
    return {
        "D_h": float(np.abs(Dh + 2 / H * np.einsum("nm,i->nmi", h, H_i)).max()),
        "third_N": float(np.abs(tc.value(frame.Ndd) - rep).max()),
    }
