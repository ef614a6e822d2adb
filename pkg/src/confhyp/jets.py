"""Truncated multivariate Taylor jets.

A jet stores the Taylor coefficients of a function of ``dim`` variables about
a base point, up to total degree ``order``, densely in graded-lex order.  Jets
may carry a tensor shape: the coefficient array then has shape
``(*shape, ncoeffs)`` and all arithmetic is elementwise over the tensor axes,
with :func:`einsum` for contractions.

Every operation is exact on the retained degrees.  Operations that consume
derivatives lower the order (``d`` drops one order, ``divide_last(k)`` drops
``k``); mixed-order arithmetic truncates to the smaller order, which is the
order to which the result is actually known.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np


class JetError(ValueError):
    """Contract violation in jet arithmetic."""


class SingularJetError(JetError):
    """Raised when inverting a jet with vanishing constant term."""


def _graded_lex(dim: int, order: int) -> np.ndarray:
    rows: list[tuple[int, ...]] = []
    for deg in range(order + 1):
        block = [
            c for c in itertools.product(range(deg + 1), repeat=dim) if sum(c) == deg
        ]
        block.sort(reverse=True)
        rows.extend(block)
    return np.array(rows, dtype=np.int64).reshape(len(rows), dim)


def ncoeffs(dim: int, order: int) -> int:
    return math.comb(order + dim, dim)


class JetSpace:
    """Index tables shared by all jets of a given ``(dim, order)``."""

    def __init__(self, dim: int, order: int):
        if dim < 1 or order < 0:
            raise JetError(f"bad jet space dim={dim} order={order}")
        self.dim = dim
        self.order = order
        self.exps = _graded_lex(dim, order)
        self.size = len(self.exps)
        self.degree = self.exps.sum(axis=1)
        self._base = order + 1
        self._weights = self._base ** np.arange(dim - 1, -1, -1)
        codes = self.exps @ self._weights
        self._lookup = np.full(self._base**dim, -1, dtype=np.int64)
        self._lookup[codes] = np.arange(self.size)
        self._cache: dict = {}

    def __repr__(self) -> str:
        return f"JetSpace(dim={self.dim}, order={self.order})"

    def index(self, alpha: Sequence[int]) -> int:
        alpha = np.asarray(alpha, dtype=np.int64)
        if alpha.shape != (self.dim,) or alpha.min() < 0 or alpha.sum() > self.order:
            raise JetError(f"multi-index {tuple(alpha)} outside {self}")
        return int(self._lookup[alpha @ self._weights])

    def indices(self, exps: np.ndarray) -> np.ndarray:
        return self._lookup[exps @ self._weights]

    @property
    def mul_table(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Index pairs (i, j) sorted by target k, plus reduceat offsets."""
        if "mul" not in self._cache:
            ii, jj, kk = [], [], []
            for i in range(self.size):
                m = ncoeffs(self.dim, self.order - int(self.degree[i]))
                js = np.arange(m)
                ii.append(np.full(m, i))
                jj.append(js)
                kk.append(self.indices(self.exps[i] + self.exps[:m]))
            I, J, K = (np.concatenate(a) for a in (ii, jj, kk))
            perm = np.argsort(K, kind="stable")
            I, J, K = I[perm], J[perm], K[perm]
            starts = np.searchsorted(K, np.arange(self.size))
            self._cache["mul"] = (I, J, starts)
        return self._cache["mul"]

    def diff_table(self, var: int) -> tuple[np.ndarray, np.ndarray]:
        key = ("diff", var)
        if key not in self._cache:
            low = jet_space(self.dim, self.order - 1)
            shifted = low.exps.copy()
            shifted[:, var] += 1
            src = self.indices(shifted)
            fac = shifted[:, var].astype(float)
            self._cache[key] = (src, fac)
        return self._cache[key]

    def restrict_table(self) -> np.ndarray:
        """Source indices of the coefficients that survive setting x_last = 0."""
        if "restrict" not in self._cache:
            low = jet_space(self.dim - 1, self.order)
            full = np.concatenate([low.exps, np.zeros((low.size, 1), np.int64)], axis=1)
            self._cache["restrict"] = self.indices(full)
        return self._cache["restrict"]

    def divide_table(self, k: int) -> np.ndarray:
        key = ("divide", k)
        if key not in self._cache:
            low = jet_space(self.dim, self.order - k)
            shifted = low.exps.copy()
            shifted[:, -1] += k
            self._cache[key] = self.indices(shifted)
        return self._cache[key]


@lru_cache(maxsize=None)
def jet_space(dim: int, order: int) -> JetSpace:
    return JetSpace(dim, order)


def _as_array(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


class Jet:
    """A (possibly tensor-valued) truncated Taylor jet.

    ``c`` has shape ``(*shape, space.size)``.  Instances are treated as
    immutable values.
    """

    __slots__ = ("space", "c")
    __array_priority__ = 1000

    def __init__(self, space: JetSpace, c: np.ndarray):
        c = np.asarray(c, dtype=float)
        if c.shape[-1:] != (space.size,):
            raise JetError(f"coefficient axis {c.shape[-1:]} does not fit {space}")
        self.space = space
        self.c = c

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value, dim: int, order: int) -> Jet:
        sp = jet_space(dim, order)
        value = _as_array(value)
        c = np.zeros(value.shape + (sp.size,))
        c[..., 0] = value
        return cls(sp, c)

    @classmethod
    def zeros(cls, shape: tuple[int, ...], dim: int, order: int) -> Jet:
        sp = jet_space(dim, order)
        return cls(sp, np.zeros(tuple(shape) + (sp.size,)))

    @classmethod
    def variable(cls, var: int, dim: int, order: int, base: float = 0.0) -> Jet:
        """The coordinate function x_var expanded about ``base``."""
        sp = jet_space(dim, order)
        c = np.zeros(sp.size)
        c[0] = base
        if order >= 1:
            alpha = [0] * dim
            alpha[var] = 1
            c[sp.index(alpha)] = 1.0
        return cls(sp, c)

    @classmethod
    def from_terms(cls, terms: dict[tuple[int, ...], float], dim: int, order: int) -> Jet:
        sp = jet_space(dim, order)
        c = np.zeros(sp.size)
        for alpha, v in terms.items():
            if sum(alpha) <= order:
                c[sp.index(alpha)] += v
        return cls(sp, c)

    @staticmethod
    def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
        order = min(j.order for j in jets)
        jets = [j.truncate(order) for j in jets]
        if axis < 0:
            axis -= 1
        return Jet(jets[0].space, np.stack([j.c for j in jets], axis=axis))

    # basic properties ---------------------------------------------------
    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    def __repr__(self) -> str:
        return f"Jet(dim={self.dim}, order={self.order}, shape={self.shape})"

    def value(self) -> np.ndarray | float:
        """Value at the base point."""
        v = self.c[..., 0]
        return float(v) if v.ndim == 0 else v.copy()

    def coeff(self, alpha: Sequence[int]) -> np.ndarray | float:
        v = self.c[..., self.space.index(alpha)]
        return float(v) if np.ndim(v) == 0 else v

    def __getitem__(self, key) -> Jet:
        if not isinstance(key, tuple):
            key = (key,)
        if any(k is Ellipsis for k in key):
            raise JetError("ellipsis indexing is not supported on jets")
        return Jet(self.space, self.c[key + (slice(None),)])

    @property
    def T(self) -> Jet:
        return self.transpose()

    def transpose(self, *axes: int) -> Jet:
        n = self.ndim
        axes = tuple(axes) if axes else tuple(range(n - 1, -1, -1))
        return Jet(self.space, np.transpose(self.c, axes + (n,)))

    def reshape(self, *shape: int) -> Jet:
        return Jet(self.space, self.c.reshape(tuple(shape) + (self.space.size,)))

    def sum(self, axis=None) -> Jet:
        if axis is None:
            axis = tuple(range(self.ndim))
        axis = np.atleast_1d(axis)
        axis = tuple(int(a) - 1 if a < 0 else int(a) for a in axis)
        return Jet(self.space, self.c.sum(axis=axis))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.c))) if self.c.size else 0.0

    # order management ---------------------------------------------------
    def truncate(self, order: int) -> Jet:
        if order == self.order:
            return self
        if order > self.order:
            raise JetError(f"cannot raise order {self.order} -> {order} by truncation")
        sp = jet_space(self.dim, order)
        return Jet(sp, self.c[..., : sp.size])

    def pad(self, order: int) -> Jet:
        """Zero-extend to a higher order.  The new coefficients are unknown;
        only use when the result is multiplied by something that vanishes to
        high enough order (see :meth:`mul_vanishing`)."""
        if order <= self.order:
            return self.truncate(order)
        sp = jet_space(self.dim, order)
        c = np.zeros(self.shape + (sp.size,))
        c[..., : self.space.size] = self.c
        return Jet(sp, c)

    def mul_vanishing(self, other: Jet, vanish: int) -> Jet:
        """Product with ``other`` known to vanish to degree ``vanish``.

        The product is exact to order ``min(self.order + vanish, other.order)``.
        """
        order = min(self.order + vanish, other.order)
        return self.pad(order) * other.truncate(order)

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> Jet:
        if isinstance(other, Jet):
            if other.dim != self.dim:
                raise JetError(f"dimension mismatch {self.dim} vs {other.dim}")
            return other
        return Jet.constant(other, self.dim, self.order)

    def _align(self, other) -> tuple[Jet, Jet]:
        other = self._coerce(other)
        order = min(self.order, other.order)
        return self.truncate(order), other.truncate(order)

    def __add__(self, other) -> Jet:
        if isinstance(other, Jet):
            a, b = self._align(other)
            return Jet(a.space, a.c + b.c)
        other = _as_array(other)
        shape = np.broadcast_shapes(self.shape, other.shape)
        c = np.broadcast_to(self.c, shape + (self.space.size,)).copy()
        c[..., 0] += other
        return Jet(self.space, c)

    __radd__ = __add__

    def __neg__(self) -> Jet:
        return Jet(self.space, -self.c)

    def __sub__(self, other) -> Jet:
        return self + (-other)

    def __rsub__(self, other) -> Jet:
        return (-self) + other

    def __mul__(self, other) -> Jet:
        if isinstance(other, Jet):
            return _product(*self._align(other))
        other = _as_array(other)
        return Jet(self.space, self.c * other[..., None])

    __rmul__ = __mul__

    def __truediv__(self, other) -> Jet:
        if isinstance(other, Jet):
            return self * reciprocal(other)
        return self * (1.0 / _as_array(other))

    def __rtruediv__(self, other) -> Jet:
        return reciprocal(self) * other

    def __pow__(self, p) -> Jet:
        if isinstance(p, (int, np.integer)) or (isinstance(p, float) and p.is_integer()):
            p = int(p)
            if p >= 0:
                return _int_power(self, p)
            return _int_power(reciprocal(self), -p)
        return power(self, float(p))

    # calculus -----------------------------------------------------------
    def d(self, var: int) -> Jet:
        """Partial derivative along variable ``var``; lowers the order by one."""
        if self.order == 0:
            raise JetError("cannot differentiate an order-0 jet")
        src, fac = self.space.diff_table(var)
        return Jet(jet_space(self.dim, self.order - 1), self.c[..., src] * fac)

    def grad(self) -> Jet:
        """All partials, derivative index first: shape ``(dim, *shape)``."""
        return Jet.stack([self.d(i) for i in range(self.dim)], axis=0)

    def restrict(self) -> Jet:
        """Set the last variable to zero, giving a jet in ``dim - 1`` variables."""
        if self.dim < 2:
            raise JetError("cannot restrict a jet in one variable")
        src = self.space.restrict_table()
        return Jet(jet_space(self.dim - 1, self.order), self.c[..., src])

    def extend(self) -> Jet:
        """Inverse of :meth:`restrict`: constant in a new last variable."""
        sp = jet_space(self.dim + 1, self.order)
        c = np.zeros(self.shape + (sp.size,))
        c[..., sp.restrict_table()] = self.c
        return Jet(sp, c)

    def divide_last(self, k: int) -> Jet:
        """Exact quotient by ``x_last**k`` of a jet divisible by it.

        Coefficients with fewer than ``k`` powers of the last variable must
        vanish; their size is the caller's responsibility (see
        :meth:`low_last_residual`).
        """
        if k == 0:
            return self
        if k > self.order:
            raise JetError(f"cannot divide order-{self.order} jet by x_last^{k}")
        src = self.space.divide_table(k)
        return Jet(jet_space(self.dim, self.order - k), self.c[..., src])

    def low_last_residual(self, k: int) -> float:
        """Largest coefficient carrying fewer than ``k`` powers of x_last."""
        mask = self.space.exps[:, -1] < k
        if not mask.any():
            return 0.0
        return float(np.max(np.abs(self.c[..., mask]), initial=0.0))

    def shift(self, point: Sequence[float]) -> Jet:
        """Re-expand about ``base + point`` (polynomial shift of the truncation)."""
        point = np.asarray(point, dtype=float)
        vars_ = [Jet.variable(i, self.dim, self.order, point[i]) for i in range(self.dim)]
        return compose_polynomial(self, vars_)


def _product(a: Jet, b: Jet) -> Jet:
    I, J, starts = a.space.mul_table
    prod = a.c[..., I] * b.c[..., J]
    return Jet(a.space, np.add.reduceat(prod, starts, axis=-1))


def _int_power(a: Jet, p: int) -> Jet:
    result = None
    base = a
    while p:
        if p & 1:
            result = base if result is None else result * base
        p >>= 1
        if p:
            base = base * base
    if result is None:
        return Jet.constant(np.ones(a.shape), a.dim, a.order)
    return result


def einsum(subscripts: str, *operands) -> Jet:
    """Tensor contraction of jets (and constant arrays) following numpy.einsum.

    Products of jets are truncated Cauchy products; constant ndarray operands
    act on every coefficient.
    """
    ins, out = subscripts.replace(" ", "").split("->")
    specs = ins.split(",")
    if len(specs) != len(operands):
        raise JetError("einsum operand count mismatch")
    used = set(subscripts)
    pair = next(ch for ch in "zyxwvutsrqponmlkjihgfedcba" if ch not in used)
    jets = [(s, o) for s, o in zip(specs, operands) if isinstance(o, Jet)]
    consts = [(s, _as_array(o)) for s, o in zip(specs, operands) if not isinstance(o, Jet)]
    if not jets:
        raise JetError("einsum needs at least one jet operand")
    order = min(o.order for _, o in jets)
    jets = [(s, o.truncate(order)) for s, o in jets]
    space = jets[0][1].space
    # fold constants into the first jet
    s0, j0 = jets[0]
    if consts:
        keep = "".join(dict.fromkeys(s0 + "".join(s for s, _ in consts)))
        need = set(out).union(*[set(s) for s, _ in jets[1:]])
        keep = "".join(ch for ch in keep if ch in need)
        spec = ",".join([s0 + pair] + [s for s, _ in consts]) + "->" + keep + pair
        c0 = np.einsum(spec, j0.c, *[c for _, c in consts])
        s0, j0 = keep, Jet(space, c0)
    cur_s, cur = s0, j0
    rest = jets[1:]
    for k, (s, o) in enumerate(rest):
        later = set(out).union(*[set(t) for t, _ in rest[k + 1 :]])
        keep = "".join(ch for ch in dict.fromkeys(cur_s + s) if ch in later)
        I, J, starts = space.mul_table
        prod = _pair_einsum(cur_s + pair, cur.c[..., I], s + pair, o.c[..., J], keep + pair)
        cur_s, cur = keep, Jet(space, np.add.reduceat(prod, starts, axis=-1))
    if cur_s != out:
        cur = Jet(space, np.einsum(f"{cur_s}{pair}->{out}{pair}", cur.c))
    return cur


def _pair_einsum(sa: str, A: np.ndarray, sb: str, B: np.ndarray, out: str) -> np.ndarray:
    """np.einsum for two operands, routed through batched matmul."""
    if len(set(sa)) != len(sa) or len(set(sb)) != len(sb):
        return np.einsum(f"{sa},{sb}->{out}", A, B)
    # sum away indices private to one operand and absent from the output
    pa = "".join(ch for ch in sa if ch in sb or ch in out)
    if pa != sa:
        A = np.einsum(f"{sa}->{pa}", A)
        sa = pa
    pb = "".join(ch for ch in sb if ch in sa or ch in out)
    if pb != sb:
        B = np.einsum(f"{sb}->{pb}", B)
        sb = pb
    batch = "".join(ch for ch in sa if ch in sb and ch in out)
    con = "".join(ch for ch in sa if ch in sb and ch not in out)
    left = "".join(ch for ch in sa if ch not in sb)
    right = "".join(ch for ch in sb if ch not in sa)
    dims = dict(zip(sa, A.shape))
    dims.update(zip(sb, B.shape))
    size = lambda letters: int(np.prod([dims[ch] for ch in letters], dtype=np.int64))
    A2 = np.einsum(f"{sa}->{batch}{left}{con}", A).reshape(size(batch), size(left), size(con))
    B2 = np.einsum(f"{sb}->{batch}{con}{right}", B).reshape(size(batch), size(con), size(right))
    C = np.matmul(A2, B2).reshape([dims[ch] for ch in batch + left + right])
    mid = batch + left + right
    return C if mid == out else np.einsum(f"{mid}->{out}", C)


# univariate composition ------------------------------------------------------

TaylorTable = Callable[[np.ndarray, int], np.ndarray]
"""Maps base values x0 (any shape) to coefficients f^(k)(x0)/k!, k = 0..N,
stacked along a new leading axis."""


def _domain(cond: np.ndarray, name: str, x0: np.ndarray) -> None:
    if np.any(cond):
        raise DomainError(f"{name} evaluated at {np.asarray(x0)[cond].ravel()[:3]}")


class DomainError(JetError):
    """Elementary function evaluated outside its smooth domain."""


def exp_table(x0: np.ndarray, n: int) -> np.ndarray:
    e = np.exp(x0)
    return np.stack([e / math.factorial(k) for k in range(n + 1)])


def log_table(x0: np.ndarray, n: int) -> np.ndarray:
    _domain(x0 <= 0, "log", x0)
    out = [np.log(x0)]
    for k in range(1, n + 1):
        out.append((-1) ** (k + 1) / (k * x0**k))
    return np.stack(out)


def sin_table(x0: np.ndarray, n: int) -> np.ndarray:
    s, c = np.sin(x0), np.cos(x0)
    cyc = [s, c, -s, -c]
    return np.stack([cyc[k % 4] / math.factorial(k) for k in range(n + 1)])


def cos_table(x0: np.ndarray, n: int) -> np.ndarray:
    s, c = np.sin(x0), np.cos(x0)
    cyc = [c, -s, -c, s]
    return np.stack([cyc[k % 4] / math.factorial(k) for k in range(n + 1)])


def power_table(p: float) -> TaylorTable:
    def table(x0: np.ndarray, n: int) -> np.ndarray:
        if n > 0 or p < 0:
            _domain(x0 <= 0 if not float(p).is_integer() else x0 == 0, f"power {p}", x0)
        out = []
        binom = 1.0
        for k in range(n + 1):
            out.append(binom * np.power(x0, p - k))
            binom *= (p - k) / (k + 1)
        return np.stack(out)

    return table


def sqrt_table(x0: np.ndarray, n: int) -> np.ndarray:
    _domain(x0 <= 0 if n > 0 else x0 < 0, "sqrt", x0)
    return power_table(0.5)(x0, n)


def compose_univariate(table: TaylorTable, g: Jet) -> Jet:
    """f∘g for f given by its Taylor table, by Horner in g - g(base)."""
    g0 = _as_array(g.value())
    coeffs = table(g0, g.order)
    h = g - g0
    result = Jet.constant(coeffs[g.order], g.dim, g.order)
    for k in range(g.order - 1, -1, -1):
        result = result * h + coeffs[k]
    return result


def reciprocal(a: Jet) -> Jet:
    a0 = _as_array(a.value())
    if np.any(a0 == 0):
        raise SingularJetError("reciprocal of a jet with zero constant term")
    return compose_univariate(power_table(-1.0), a)


def exp(a: Jet) -> Jet:
    return compose_univariate(exp_table, a)


def log(a: Jet) -> Jet:
    return compose_univariate(log_table, a)


def sin(a: Jet) -> Jet:
    return compose_univariate(sin_table, a)


def cos(a: Jet) -> Jet:
    return compose_univariate(cos_table, a)


def sqrt(a: Jet) -> Jet:
    return compose_univariate(sqrt_table, a)


def power(a: Jet, p: float) -> Jet:
    return compose_univariate(power_table(p), a)


def compose_polynomial(f: Jet, inner: Sequence[Jet]) -> Jet:
    """Substitute jets ``inner`` (one per variable of ``f``) into the polynomial
    that ``f``'s coefficients define.  Exact when each inner jet vanishes at
    its base point; otherwise the truncated polynomial is evaluated as is."""
    if len(inner) != f.dim:
        raise JetError("one inner jet per variable is required")
    order = min(j.order for j in inner)
    dim = inner[0].dim
    sp = f.space
    powers = []
    for j in inner:
        row = [Jet.constant(1.0, dim, order)]
        for _ in range(sp.order):
            row.append(row[-1] * j.truncate(order))
        powers.append(row)
    out = Jet.zeros(f.shape, dim, order)
    for idx, alpha in enumerate(sp.exps):
        mono = powers[0][alpha[0]]
        for v in range(1, f.dim):
            if alpha[v]:
                mono = mono * powers[v][alpha[v]]
        coef = f.c[..., idx]
        if np.any(coef != 0):
            out = out + mono * coef
    return out


# matrix helpers ---------------------------------------------------------------

def identity(n: int, dim: int, order: int) -> Jet:
    return Jet.constant(np.eye(n), dim, order)


def inv(G: Jet) -> Jet:
    """Inverse of a square matrix of jets by Newton iteration X ← X(2 − GX)."""
    n = G.shape[0]
    G0 = _as_array(G.value())
    if abs(np.linalg.det(G0)) < 1e-300 or np.linalg.cond(G0) > 1e14:
        raise SingularJetError("matrix jet is singular at the base point")
    X = Jet.constant(np.linalg.inv(G0), G.dim, 0)
    two = 2.0 * np.eye(n)
    known = 1  # X is exact below this degree; each step doubles it
    while known <= G.order:
        o = min(2 * known - 1, G.order)
        X = X.pad(o)
        X = einsum("ij,jk->ik", X, two - einsum("ij,jk->ik", G.truncate(o), X))
        known *= 2
    return X


def det(G: Jet) -> Jet:
    n = G.shape[0]
    if n == 1:
        return G[0, 0]
    total = None
    for j in range(n):
        minor = Jet.stack(
            [Jet.stack([G[i, k] for k in range(n) if k != j]) for i in range(1, n)]
        )
        term = G[0, j] * det(minor) * (-1.0) ** j
        total = term if total is None else total + term
    return total


# strict public operations -----------------------------------------------------

def jet_multiply(a: Jet, b: Jet) -> Jet:
    """Truncated Cauchy product of two jets of identical dim and order."""
    if a.dim != b.dim or a.order != b.order:
        raise JetError(
            f"jet_multiply needs matching spaces, got {a.space} and {b.space}"
        )
    return _product(a, b)


def jet_compose_univariate(table: TaylorTable, g: Jet) -> Jet:
    return compose_univariate(table, g)


def jet_reciprocal(a: Jet) -> Jet:
    return reciprocal(a)
