"""Dense tensors, truncated Taylor jets and finite differences.

A :class:`Jet` stores every partial derivative of a tensor-valued quantity up
to a fixed total order with respect to a small set of seed variables.  It is
the multivariate form of nested dual numbers: a jet of order 4 carries exactly
the information of four nested first-order duals, but stores each symmetric
coefficient once.  Coefficients are kept in Taylor normalization, so the
coefficient of the monomial ``e^alpha`` equals ``D^alpha f / alpha!``.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np

__all__ = [
    "Jet", "JetBasis", "basis", "exp", "log", "sqrt", "arctan", "arccos",
    "atan2", "power", "einsum", "stack", "inv", "value", "differentiate_y",
    "fd_gradient_x", "invert", "symmetrize", "antisymmetrize", "is_jet",
    "IllConditioned", "NonFinite",
]


class NonFinite(ArithmeticError):
    """Evaluation produced nan or inf, usually outside the admissible cone."""


class IllConditioned(np.linalg.LinAlgError):
    """Matrix too close to singular for a trustworthy inverse."""


class JetBasis:
    """Monomial bookkeeping for ``nvars`` seed variables up to ``order``."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        monos = []
        for deg in range(order + 1):
            for combo in itertools.combinations_with_replacement(range(nvars), deg):
                alpha = [0] * nvars
                for v in combo:
                    alpha[v] += 1
                monos.append(tuple(alpha))
        self.monos = monos
        self.index = {m: i for i, m in enumerate(monos)}
        self.degree = np.array([sum(m) for m in monos])
        self._sizes = [int(np.sum(self.degree <= k)) for k in range(order + 1)]
        self.factorial = np.array([math.prod(math.factorial(a) for a in m) for m in monos], float)
        self._tables: dict = {}
        self._diffs: dict = {}

    def size(self, order: int) -> int:
        return self._sizes[order]

    def mul_table(self, order: int):
        """Pairs (i, j) feeding each output coefficient, grouped for reduceat."""
        if order not in self._tables:
            n = self.size(order)
            rows = []
            for i in range(n):
                mi = self.monos[i]
                for j in range(n):
                    if self.degree[i] + self.degree[j] > order:
                        continue
                    k = self.index[tuple(a + b for a, b in zip(mi, self.monos[j]))]
                    rows.append((k, i, j))
            rows.sort()
            arr = np.array(rows)
            starts = np.searchsorted(arr[:, 0], np.arange(n))
            self._tables[order] = (arr[:, 1], arr[:, 2], starts)
        return self._tables[order]

    def diff_map(self, var: int, order: int):
        """Source indices and factors taking an order-``order`` jet to its ``var`` derivative."""
        key = (var, order)
        if key not in self._diffs:
            n = self.size(order - 1)
            src = np.empty(n, int)
            fac = np.empty(n)
            for r in range(n):
                alpha = list(self.monos[r])
                alpha[var] += 1
                src[r] = self.index[tuple(alpha)]
                fac[r] = alpha[var]
            self._diffs[key] = (src, fac)
        return self._diffs[key]

    def seed(self, point, first: int = 0) -> "Jet":
        """Vector jet ``point + e_first .. e_{first+len-1}``."""
        point = np.asarray(point, float)
        n = self.size(self.order)
        c = np.zeros((n,) + point.shape)
        c[0] = point
        for a in range(point.shape[-1]):
            alpha = [0] * self.nvars
            alpha[first + a] = 1
            c[(self.index[tuple(alpha)], Ellipsis, a)] = 1.0
        return Jet(c, self, self.order)

    def constant(self, arr, order: int | None = None) -> "Jet":
        arr = np.asarray(arr, float)
        order = self.order if order is None else order
        c = np.zeros((self.size(order),) + arr.shape)
        c[0] = arr
        return Jet(c, self, order)

    def __repr__(self):
        return f"JetBasis(nvars={self.nvars}, order={self.order})"


@lru_cache(maxsize=None)
def basis(nvars: int, order: int) -> JetBasis:
    return JetBasis(nvars, order)


def _pad(c: np.ndarray, ndim: int) -> np.ndarray:
    """Insert axes after the coefficient axis so the value part has ``ndim`` axes."""
    extra = ndim - (c.ndim - 1)
    if extra <= 0:
        return c
    return c.reshape(c.shape[:1] + (1,) * extra + c.shape[1:])


class Jet:
    """Tensor-valued truncated Taylor polynomial.

    ``c[k]`` is the coefficient tensor of monomial ``basis.monos[k]``; only the
    first ``basis.size(order)`` monomials are stored.
    """

    __slots__ = ("c", "basis", "order")
    __array_priority__ = 100

    def __init__(self, c: np.ndarray, basis: JetBasis, order: int):
        self.c = c
        self.basis = basis
        self.order = order

    # structure
    @property
    def shape(self):
        return self.c.shape[1:]

    @property
    def ndim(self):
        return self.c.ndim - 1

    @property
    def value(self) -> np.ndarray:
        v = self.c[0]
        return v.item() if v.ndim == 0 else v

    def __len__(self):
        return self.shape[0]

    def __getitem__(self, idx):
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[(slice(None),) + idx], self.basis, self.order)

    def __iter__(self):
        for i in range(self.shape[0]):
            yield self[i]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise ValueError("cannot raise jet order")
        return Jet(self.c[: self.basis.size(order)], self.basis, order)

    def transpose(self, *axes) -> "Jet":
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        elif len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return Jet(self.c.transpose((0,) + tuple(a + 1 for a in axes)), self.basis, self.order)

    @property
    def T(self):
        return self.transpose()

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return Jet(self.c.reshape((self.c.shape[0],) + tuple(shape)), self.basis, self.order)

    def sum(self, axis=None) -> "Jet":
        if axis is None:
            axis = tuple(range(self.ndim))
        elif isinstance(axis, int):
            axis = (axis,)
        axis = tuple((a % self.ndim) + 1 for a in axis)
        return Jet(self.c.sum(axis=axis), self.basis, self.order)

    # arithmetic
    def _coerce(self, other):
        if isinstance(other, Jet):
            if other.basis is not self.basis:
                raise ValueError("jets over different bases")
            order = min(self.order, other.order)
            return order, self.truncate(order), other.truncate(order)
        return None

    def __neg__(self):
        return Jet(-self.c, self.basis, self.order)

    def __pos__(self):
        return self

    def __add__(self, other):
        co = self._coerce(other)
        if co is None:
            other = np.asarray(other, float)
            nd = max(self.ndim, other.ndim)
            c = _pad(self.c, nd).copy() if nd > self.ndim else self.c.copy()
            c = c + np.zeros((1,) + other.shape)
            c[0] = c[0] + other
            return Jet(c, self.basis, self.order)
        order, a, b = co
        nd = max(a.ndim, b.ndim)
        return Jet(_pad(a.c, nd) + _pad(b.c, nd), self.basis, order)

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        co = self._coerce(other)
        if co is None:
            other = np.asarray(other, float)
            nd = max(self.ndim, other.ndim)
            return Jet(_pad(self.c, nd) * other, self.basis, self.order)
        order, a, b = co
        nd = max(a.ndim, b.ndim)
        ai, bj, starts = self.basis.mul_table(order)
        prod = _pad(a.c, nd)[ai] * _pad(b.c, nd)[bj]
        return Jet(np.add.reduceat(prod, starts, axis=0), self.basis, order)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, float))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, p):
        if isinstance(p, (int, np.integer)) and 0 <= p <= 8:
            out = None
            for _ in range(int(p)):
                out = self if out is None else out * self
            return self.basis.constant(np.ones(self.shape), self.order) if out is None else out
        return power(self, p)

    def __matmul__(self, other):
        return einsum("...ij,...jk->...ik", self, other)

    def __rmatmul__(self, other):
        return einsum("...ij,...jk->...ik", other, self)

    def reciprocal(self):
        return self.compose(_series_power(self.c[0], -1.0, self.order))

    def compose(self, coeffs) -> "Jet":
        """Evaluate sum_j coeffs[j] * (self - self.value)**j by Horner's rule."""
        if not np.all(np.isfinite(coeffs[0])):
            raise NonFinite("non-finite value in jet function")
        delta = Jet(self.c.copy(), self.basis, self.order)
        delta.c[0] = 0.0
        out = self.basis.constant(coeffs[self.order], self.order)
        for j in range(self.order - 1, -1, -1):
            out = out * delta
            out.c[0] = out.c[0] + coeffs[j]
        return out

    # calculus
    def diff(self, var: int) -> "Jet":
        if self.order < 1:
            raise ValueError("jet order exhausted")
        src, fac = self.basis.diff_map(var, self.order)
        return Jet(self.c[src] * fac.reshape((-1,) + (1,) * self.ndim), self.basis, self.order - 1)

    def grad(self, variables) -> "Jet":
        """Jet of first derivatives; the derivative index is appended last."""
        parts = [self.diff(v) for v in variables]
        return Jet(np.stack([p.c for p in parts], axis=-1), self.basis, self.order - 1)

    def partial(self, *variables) -> np.ndarray:
        """Value of the mixed partial derivative with respect to ``variables``."""
        alpha = [0] * self.basis.nvars
        for v in variables:
            alpha[v] += 1
        k = self.basis.index[tuple(alpha)]
        if self.basis.degree[k] > self.order:
            raise ValueError("derivative order exceeds jet order")
        return self.c[k] * self.basis.factorial[k]

    def derivative_tensor(self, variables, order: int) -> np.ndarray:
        """Symmetric tensor of all ``order``-th partials in ``variables`` (axes appended)."""
        m = len(variables)
        out = np.empty(self.shape + (m,) * order)
        for idx in itertools.product(range(m), repeat=order):
            out[(...,) + idx] = self.partial(*(variables[i] for i in idx))
        return out

    def __repr__(self):
        return f"Jet(value={self.c[0]!r}, order={self.order}, nvars={self.basis.nvars})"


def is_jet(z) -> bool:
    return isinstance(z, Jet)


def value(z):
    return z.c[0] if isinstance(z, Jet) else np.asarray(z, float)


# univariate Taylor coefficient series, elementwise over the value array

def _series_power(a0, p, order):
    a0 = np.asarray(a0, float)
    out = [a0 ** p]
    coef = 1.0
    for j in range(1, order + 1):
        coef *= (p - j + 1) / j
        out.append(coef * a0 ** (p - j))
    return out


def _series_of_power_poly(P, p, order):
    """Coefficients of P(t)**p for a polynomial P given by coefficient arrays."""
    P = list(P) + [np.zeros_like(P[0])] * (order + 1)
    w = [P[0] ** p]
    for j in range(1, order + 1):
        acc = np.zeros_like(P[0])
        for i in range(1, j + 1):
            acc = acc + (p * i - (j - i)) * P[i] * w[j - i]
        w.append(acc / (j * P[0]))
    return w


def exp(z):
    if not isinstance(z, Jet):
        return np.exp(z)
    e0 = np.exp(z.c[0])
    return z.compose([e0 / math.factorial(j) for j in range(z.order + 1)])


def log(z):
    if not isinstance(z, Jet):
        return np.log(z)
    a0 = z.c[0]
    return z.compose([np.log(a0)] + [(-1.0) ** (j + 1) / (j * a0 ** j) for j in range(1, z.order + 1)])


def power(z, p):
    if not isinstance(z, Jet):
        return np.power(z, p)
    return z.compose(_series_power(z.c[0], float(p), z.order))


def sqrt(z):
    if not isinstance(z, Jet):
        return np.sqrt(z)
    return power(z, 0.5)


def arctan(z):
    if not isinstance(z, Jet):
        return np.arctan(z)
    a0 = z.c[0]
    d0, d1 = 1.0 + a0 * a0, 2.0 * a0
    r = [1.0 / d0]
    for j in range(1, z.order):
        prev2 = r[j - 2] if j >= 2 else 0.0
        r.append(-(d1 * r[j - 1] + prev2) / d0)
    return z.compose([np.arctan(a0)] + [r[j - 1] / j for j in range(1, z.order + 1)])


def arccos(z):
    if not isinstance(z, Jet):
        return np.arccos(z)
    a0 = z.c[0]
    w = _series_of_power_poly([1.0 - a0 * a0, -2.0 * a0, -np.ones_like(a0)], -0.5, z.order)
    return z.compose([np.arccos(a0)] + [-w[j - 1] / j for j in range(1, z.order + 1)])


def atan2(num, den):
    """Quadrant-correct arctangent of num/den, differentiable away from the origin."""
    if not isinstance(num, Jet) and not isinstance(den, Jet):
        return np.arctan2(num, den)
    n0, d0 = np.broadcast_arrays(value(num), value(den))
    use_ratio = np.abs(d0) >= np.abs(n0)
    # each branch gets a harmless constant where it is not selected
    den_safe = den + np.where(use_ratio, 0.0, 1.0 - d0)
    num_safe = num + np.where(use_ratio, 1.0 - n0, 0.0)
    first = arctan(num / den_safe)
    second = -arctan(den / num_safe)
    nd = max(first.ndim, second.ndim)
    c = np.where(use_ratio, _pad(first.c, nd), _pad(second.c, nd))
    c[0] = np.arctan2(n0, d0)
    return Jet(c, first.basis, min(first.order, second.order))


def einsum(subscripts: str, *operands):
    """np.einsum that accepts jets; jet operands are contracted pairwise."""
    if not any(isinstance(op, Jet) for op in operands):
        return np.einsum(subscripts, *operands)
    lhs, rhs = subscripts.split("->")
    terms = lhs.split(",")
    if len(operands) == 1:
        (op,) = operands
        return Jet(np.einsum(f"Z{terms[0]}->Z{rhs}", op.c), op.basis, op.order)
    # left fold; intermediate keeps every index still needed later
    cur, cur_t = operands[0], terms[0]
    for k in range(1, len(operands)):
        nxt, nxt_t = operands[k], terms[k]
        later = "".join(terms[k + 1:]) + rhs
        if k == len(operands) - 1:
            out_t = rhs
        else:
            keep = []
            for ch in cur_t + nxt_t:
                if ch == "." or ch in keep:
                    continue
                if ch in later:
                    keep.append(ch)
            out_t = ("..." if "..." in cur_t + nxt_t else "") + "".join(keep)
        cur = _einsum2(f"{cur_t},{nxt_t}->{out_t}", cur, nxt)
        cur_t = out_t
    return cur


_LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXY"


def _expand(term: str, ndim: int, fill: str) -> str:
    if "..." not in term:
        return term
    n_ell = ndim - (len(term) - 3)
    return term.replace("...", fill[len(fill) - n_ell:] if n_ell else "")


def _contract(ta: str, tb: str, rhs: str, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Two-operand einsum routed through batched matmul."""
    if len(set(ta)) < len(ta) or len(set(tb)) < len(tb):
        return np.einsum(f"{ta},{tb}->{rhs}", A, B)
    for ch in ta:
        if ch not in tb and ch not in rhs:
            A = A.sum(axis=ta.index(ch))
            ta = ta.replace(ch, "")
    for ch in tb:
        if ch not in ta and ch not in rhs:
            B = B.sum(axis=tb.index(ch))
            tb = tb.replace(ch, "")
    batch = [ch for ch in ta if ch in tb and ch in rhs]
    inner = [ch for ch in ta if ch in tb and ch not in rhs]
    fa = [ch for ch in ta if ch not in tb]
    fb = [ch for ch in tb if ch not in ta]
    dims = {ch: A.shape[i] for i, ch in enumerate(ta)}
    for i, ch in enumerate(tb):
        dims[ch] = max(dims.get(ch, 1), B.shape[i])
    A = A.transpose([ta.index(ch) for ch in batch + fa + inner])
    B = B.transpose([tb.index(ch) for ch in batch + inner + fb])
    bshape = [dims[ch] for ch in batch]
    na = math.prod(dims[ch] for ch in fa)
    nb = math.prod(dims[ch] for ch in fb)
    ni = math.prod(dims[ch] for ch in inner)
    A = np.broadcast_to(A, bshape + list(A.shape[len(batch):])).reshape(bshape + [na, ni])
    B = np.broadcast_to(B, bshape + list(B.shape[len(batch):])).reshape(bshape + [ni, nb])
    out = np.matmul(A, B).reshape(bshape + [dims[ch] for ch in fa + fb])
    order = batch + fa + fb
    return out.transpose([order.index(ch) for ch in rhs])


def _einsum2(sub, a, b):
    lhs, rhs = sub.split("->")
    ta, tb = lhs.split(",")
    if isinstance(a, Jet) and isinstance(b, Jet):
        order = min(a.order, b.order)
        ai, bj, starts = a.basis.mul_table(order)
        A, B = a.c[ai], b.c[bj]
        ea = _expand(ta, A.ndim - 1, _LETTERS)
        eb = _expand(tb, B.ndim - 1, _LETTERS)
        nell = max(A.ndim - 1 - (len(ta) - 3 if "..." in ta else len(ta)),
                   B.ndim - 1 - (len(tb) - 3 if "..." in tb else len(tb)), 0)
        er = _expand(rhs, nell + len(rhs) - 3, _LETTERS) if "..." in rhs else rhs
        prod = _contract("Z" + ea, "Z" + eb, "Z" + er, A, B)
        return Jet(np.add.reduceat(prod, starts, axis=0), a.basis, order)
    if isinstance(a, Jet):
        return Jet(np.einsum(f"Z{ta},{tb}->Z{rhs}", a.c, np.asarray(b, float)), a.basis, a.order)
    return Jet(np.einsum(f"{ta},Z{tb}->Z{rhs}", np.asarray(a, float), b.c), b.basis, b.order)


def stack(items, axis: int = 0):
    """Stack jets and plain arrays along a new value axis."""
    jets = [z for z in items if isinstance(z, Jet)]
    if not jets:
        return np.stack([np.asarray(z, float) for z in items], axis=axis)
    ref = jets[0]
    order = min(z.order for z in jets)
    n = ref.basis.size(order)
    cs = []
    for z in items:
        if isinstance(z, Jet):
            cs.append(z.c[:n])
        else:
            c = np.zeros((n,) + np.shape(z))
            c[0] = z
            cs.append(c)
    shape = np.broadcast_shapes(*[c.shape for c in cs])
    cs = [np.broadcast_to(c, shape) for c in cs]
    ax = axis + 1 if axis >= 0 else axis
    return Jet(np.stack(cs, axis=ax), ref.basis, order)


def inv(m, cond_max: float = 1e12):
    """Matrix inverse over the last two axes; jets use a terminating Neumann series."""
    if not isinstance(m, Jet):
        return invert(m, cond_max)
    m0 = m.c[0]
    if m0.ndim != 2:
        raise ValueError("jet inverse expects a single matrix")
    i0 = invert(m0, cond_max)
    step = einsum("ij,jk->ik", -i0, m - m0)
    step.c[0] = 0.0
    out = m.basis.constant(i0, m.order)
    term = out
    for _ in range(m.order):
        term = einsum("ij,jk->ik", step, term)
        out = out + term
    return out


def invert(m, cond_max: float = 1e12) -> np.ndarray:
    """Inverse of a square matrix, refusing ill-conditioned input."""
    m = np.asarray(m, float)
    if not np.all(np.isfinite(m)):
        raise NonFinite("matrix has non-finite entries")
    if np.linalg.cond(m) > cond_max:
        raise IllConditioned("matrix is singular or ill-conditioned")
    return np.linalg.inv(m)


def differentiate_y(f, x, y, order: int) -> np.ndarray:
    """Symmetric ``order``-th derivative tensor of ``f(x, y)`` in ``y``."""
    if not 0 <= order <= 4:
        raise ValueError("order must lie in 0..4")
    y = np.asarray(y, float)
    b = basis(y.shape[0], max(order, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        out = f(x, b.seed(y))
    if not isinstance(out, Jet):
        out = b.constant(out)
    if not np.all(np.isfinite(out.c)):
        raise NonFinite("non-finite intermediate; point likely outside the admissible cone")
    return out.derivative_tensor(list(range(y.shape[0])), order)


def fd_gradient_x(f, x, step: float = 1e-4) -> np.ndarray:
    """Central difference with one Richardson level; gradient index appended last."""
    if step <= 0:
        raise ValueError("step must be positive")
    x = np.asarray(x, float)
    cols = []
    for i in range(x.shape[0]):
        e = np.zeros_like(x)
        e[i] = 1.0
        vals = [np.asarray(f(x + s * step * e), float) for s in (1.0, -1.0, 0.5, -0.5)]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise NonFinite("non-finite evaluation at stencil point")
        d1 = (vals[0] - vals[1]) / (2 * step)
        d2 = (vals[2] - vals[3]) / step
        cols.append((4 * d2 - d1) / 3)
    return np.stack(cols, axis=-1)


def symmetrize(t: np.ndarray, axes=(0, 1)) -> np.ndarray:
    return 0.5 * (t + np.swapaxes(t, *axes))


def antisymmetrize(t: np.ndarray, axes=(0, 1)) -> np.ndarray:
    return 0.5 * (t - np.swapaxes(t, *axes))
