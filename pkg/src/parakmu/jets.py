"""Order-3 truncated Taylor jets in the three chart coordinates (x, y, z).

A :class:`Jet` stores, for every multi-index ``(i, j, k)`` with
``i + j + k <= 3``, the Taylor coefficient ``d^{i+j+k} f / dx^i dy^j dz^k``
divided by ``i! j! k!``.  The coefficient axis is always axis 0; any further
axes are tensor indices followed by an optional batch of sample points, so a
whole grid is pushed through the arithmetic in one numpy pass.

``order`` is the derivative budget: coefficients of total degree above it are
not trustworthy and are kept at zero.  Differentiating with :meth:`Jet.d`
spends one unit of budget.
"""

from __future__ import annotations

import itertools
import math
from typing import Callable, Sequence

import numpy as np

MAX_ORDER = 3
DIVISION_EPS = 1e-12


class JetError(ArithmeticError):
    """Base class for jet arithmetic failures."""


class DivisionNearZero(JetError, ZeroDivisionError):
    pass


class DomainError(JetError, ValueError):
    """sqrt or ln of a nonpositive value."""


class BudgetExhausted(JetError):
    """A field was differentiated more often than its derivative budget allows."""


MULTI_INDICES: tuple[tuple[int, int, int], ...] = tuple(
    sorted(
        (m for m in itertools.product(range(MAX_ORDER + 1), repeat=3) if sum(m) <= MAX_ORDER),
        key=lambda m: (sum(m), tuple(-v for v in m)),
    )
)
NCOEF = len(MULTI_INDICES)
INDEX = {m: n for n, m in enumerate(MULTI_INDICES)}
DEGREE = np.array([sum(m) for m in MULTI_INDICES])
FACTORIAL = np.array([math.prod(math.factorial(v) for v in m) for m in MULTI_INDICES], dtype=float)


def _product_tables():
    left, right, target = [], [], []
    for p, a in enumerate(MULTI_INDICES):
        for q, b in enumerate(MULTI_INDICES):
            s = (a[0] + b[0], a[1] + b[1], a[2] + b[2])
            if sum(s) <= MAX_ORDER:
                left.append(p)
                right.append(q)
                target.append(INDEX[s])
    scatter = np.zeros((NCOEF, len(target)))
    scatter[target, np.arange(len(target))] = 1.0
    return np.array(left), np.array(right), scatter


_LEFT, _RIGHT, _SCATTER = _product_tables()


def _diff_tables():
    # d/dx_axis maps coefficient of m + e_axis (times m[axis] + 1) onto m
    tables = []
    for axis in range(3):
        src, dst, fac = [], [], []
        for n, m in enumerate(MULTI_INDICES):
            up = list(m)
            up[axis] += 1
            up = tuple(up)
            if up in INDEX:
                src.append(INDEX[up])
                dst.append(n)
                fac.append(m[axis] + 1)
        tables.append((np.array(src), np.array(dst), np.array(fac, dtype=float)))
    return tables


_DIFF = _diff_tables()


def _expand(arr: np.ndarray, ndim: int) -> np.ndarray:
    return arr.reshape(arr.shape + (1,) * (ndim - 1))


def _align(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # missing tensor axes are leading ones, so pad right after the coefficient axis
    if a.ndim < b.ndim:
        a = a.reshape(a.shape[:1] + (1,) * (b.ndim - a.ndim) + a.shape[1:])
    elif b.ndim < a.ndim:
        b = b.reshape(b.shape[:1] + (1,) * (a.ndim - b.ndim) + b.shape[1:])
    return a, b


class Jet:
    """Truncated Taylor expansion of a (tensor-valued) function at a point batch."""

    __slots__ = ("c", "order")
    __array_priority__ = 100

    def __init__(self, c, order: int = MAX_ORDER):
        c = np.asarray(c, dtype=float)
        if c.shape[:1] != (NCOEF,):
            raise ValueError(f"jet coefficient array must have leading axis {NCOEF}, got {c.shape}")
        if order < MAX_ORDER:
            c = np.where(_expand(DEGREE <= order, c.ndim), c, 0.0)
        self.c = c
        self.order = order

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, value) -> "Jet":
        value = np.asarray(value, dtype=float)
        c = np.zeros((NCOEF,) + value.shape)
        c[0] = value
        return cls(c)

    @staticmethod
    def lift(other) -> "Jet":
        return other if isinstance(other, Jet) else Jet.constant(other)

    # shape / indexing -----------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.c.shape[1:]

    @property
    def value(self) -> np.ndarray:
        return self.c[0]

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return Jet(self.c[(slice(None),) + idx], self.order)

    def __len__(self) -> int:
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def derivative(self, multi_index: Sequence[int]) -> np.ndarray:
        """Partial derivative value for ``multi_index`` (e.g. ``(1, 0, 2)``)."""
        m = tuple(int(v) for v in multi_index)
        if sum(m) > self.order:
            raise BudgetExhausted(f"derivative {m} exceeds remaining budget {self.order}")
        n = INDEX[m]
        return self.c[n] * FACTORIAL[n]

    @property
    def gradient(self) -> np.ndarray:
        """First partials stacked on a new leading axis of length 3."""
        return np.stack([self.derivative(e) for e in ((1, 0, 0), (0, 1, 0), (0, 0, 1))])

    def d(self, axis: int) -> "Jet":
        """Partial derivative along coordinate ``axis`` as a jet of one lower order."""
        if self.order < 1:
            raise BudgetExhausted("cannot differentiate a jet with zero derivative budget")
        src, dst, fac = _DIFF[axis]
        out = np.zeros_like(self.c)
        out[dst] = self.c[src] * _expand(fac, self.c.ndim)
        return Jet(out, self.order - 1)

    def with_order(self, order: int) -> "Jet":
        return Jet(self.c, min(order, self.order))

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        other = Jet.lift(other)
        a, b = _align(self.c, other.c)
        return Jet(a + b, min(self.order, other.order))

    __radd__ = __add__

    def __sub__(self, other):
        other = Jet.lift(other)
        a, b = _align(self.c, other.c)
        return Jet(a - b, min(self.order, other.order))

    def __rsub__(self, other):
        return Jet.lift(other) - self

    def __neg__(self):
        return Jet(-self.c, self.order)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            return Jet(self.c * other, self.order)
        return Jet(_mul_coeffs(self.c, other.c), min(self.order, other.order))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = np.asarray(other, dtype=float)
            if np.any(np.abs(other) <= DIVISION_EPS):
                raise DivisionNearZero("division by a constant near zero")
            return Jet(self.c / other, self.order)
        return self * reciprocal(other)

    def __rtruediv__(self, other):
        return Jet.lift(other) * reciprocal(self)

    def __pow__(self, n):
        if isinstance(n, (int, np.integer)):
            return powi(self, int(n))
        raise TypeError("jets support integer powers only")

    def __repr__(self) -> str:
        return f"Jet(shape={self.shape}, order={self.order}, value={self.value!r})"


def _mul_coeffs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a, b = _align(a, b)
    prod = a[_LEFT] * b[_RIGHT]
    return np.tensordot(_SCATTER, prod, axes=(1, 0))


def _compose(u: Jet, derivs: Sequence[np.ndarray]) -> Jet:
    """f(u) from f and its first three derivatives evaluated at value(u)."""
    delta = Jet(u.c.copy(), u.order)
    delta.c[0] = 0.0
    out = Jet.constant(derivs[0]) + delta * derivs[1]
    if u.order >= 2:
        d2 = delta * delta
        out = out + d2 * (derivs[2] / 2.0)
        if u.order >= 3:
            out = out + d2 * delta * (derivs[3] / 6.0)
    return out.with_order(u.order)


def reciprocal(u: Jet, eps: float | None = None) -> Jet:
    eps = DIVISION_EPS if eps is None else eps
    v = u.value
    if np.any(np.abs(v) <= eps):
        raise DivisionNearZero(f"division by jet with value within {eps:g} of zero")
    r = 1.0 / v
    return _compose(u, (r, -r * r, 2 * r**3, -6 * r**4))


def sqrt(u) -> Jet:
    u = Jet.lift(u)
    v = u.value
    if np.any(v <= 0.0):
        raise DomainError("sqrt of a nonpositive value")
    s = np.sqrt(v)
    return _compose(u, (s, 0.5 / s, -0.25 / (s * v), 0.375 / (s * v * v)))


def exp(u) -> Jet:
    u = Jet.lift(u)
    e = np.exp(u.value)
    return _compose(u, (e, e, e, e))


def log(u) -> Jet:
    u = Jet.lift(u)
    v = u.value
    if np.any(v <= 0.0):
        raise DomainError("ln of a nonpositive value")
    r = 1.0 / v
    return _compose(u, (np.log(v), r, -r * r, 2 * r**3))


def sin(u) -> Jet:
    u = Jet.lift(u)
    s, c = np.sin(u.value), np.cos(u.value)
    return _compose(u, (s, c, -s, -c))


def cos(u) -> Jet:
    u = Jet.lift(u)
    s, c = np.sin(u.value), np.cos(u.value)
    return _compose(u, (c, -s, -c, s))


def powi(u, n: int) -> Jet:
    u = Jet.lift(u)
    if n < 0:
        return reciprocal(powi(u, -n))
    result = Jet.constant(np.ones(u.shape)).with_order(u.order)
    base = u
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


UNARY: dict[str, Callable[[Jet], Jet]] = {
    "sqrt": sqrt,
    "exp": exp,
    "ln": log,
    "sin": sin,
    "cos": cos,
}


def jet_arith(kind: str, a: Jet, b: Jet | None = None) -> Jet:
    """Dispatch by operation name; ``powi`` takes an integer in ``b``."""
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return a * b
    if kind == "div":
        return a / b
    if kind == "neg":
        return -a
    if kind == "powi":
        return powi(a, int(b))
    if kind in UNARY:
        return UNARY[kind](a)
    raise ValueError(f"unknown jet operation {kind!r}")


# tensor helpers ---------------------------------------------------------------

def stack(jets: Sequence, axis: int = 0) -> Jet:
    """Stack jets (or plain numbers) along a new tensor axis."""
    jets = [Jet.lift(j) for j in jets]
    shapes = [j.shape for j in jets]
    full = np.broadcast_shapes(*shapes)
    order = min(j.order for j in jets)
    cs = [np.broadcast_to(j.c, (NCOEF,) + full) for j in jets]
    return Jet(np.stack(cs, axis=axis + 1), order)


def einsum(subscripts: str, a, b) -> Jet:
    """Two-operand einsum on jets, e.g. ``einsum('ij...,j...->i...', g, v)``."""
    a, b = Jet.lift(a), Jet.lift(b)
    lhs, out = subscripts.split("->")
    sa, sb = lhs.split(",")
    prod = np.einsum(f"P{sa},P{sb}->P{out}", a.c[_LEFT], b.c[_RIGHT])
    return Jet(np.tensordot(_SCATTER, prod, axes=(1, 0)), min(a.order, b.order))


def jsum(u: Jet, axis: int = 0) -> Jet:
    return Jet(u.c.sum(axis=axis + 1), u.order)


def where(cond, a: Jet, b: Jet) -> Jet:
    """Pointwise selection between two jets (cond broadcasts over tensor shape)."""
    a, b = Jet.lift(a), Jet.lift(b)
    ac, bc = _align(a.c, b.c)
    return Jet(np.where(cond, ac, bc), min(a.order, b.order))


def seed(point) -> tuple[Jet, Jet, Jet]:
    """Coordinate jets at ``point``: shape (3,) for one point or (N, 3) for a batch."""
    p = np.asarray(point, dtype=float)
    if p.shape[-1:] != (3,):
        raise ValueError(f"chart points need three coordinates, got shape {p.shape}")
    if not np.all(np.isfinite(p)):
        raise ValueError("chart point has a non-finite coordinate")
    coords = np.moveaxis(p, -1, 0)
    out = []
    for axis in range(3):
        c = np.zeros((NCOEF,) + coords.shape[1:])
        c[0] = coords[axis]
        unit = [0, 0, 0]
        unit[axis] = 1
        c[INDEX[tuple(unit)]] = 1.0
        out.append(Jet(c))
    return tuple(out)


jet_seed = seed


def finite_difference_oracle(f: Callable[[np.ndarray], float], p, h: float = 1e-3):
    """Fourth-order central-difference gradient and Hessian of ``f`` at ``p``.

    Uses stencils of radius ``2h`` in each coordinate direction.
    """
    p = np.asarray(p, dtype=float)
    weights = {-2: 1.0, -1: -8.0, 1: 8.0, 2: -1.0}

    def at(offset):
        val = f(p + h * np.asarray(offset, dtype=float))
        val = float(val)
        if not math.isfinite(val):
            raise ArithmeticError(f"field not finite at stencil point {p + h * np.asarray(offset)}")
        return val

    e = np.eye(3)
    f0 = at((0.0, 0.0, 0.0))
    grad = np.array([sum(w * at(k * e[i]) for k, w in weights.items()) / (12 * h) for i in range(3)])
    hess = np.empty((3, 3))
    for i in range(3):
        hess[i, i] = (
            -at(2 * e[i]) + 16 * at(e[i]) - 30 * f0 + 16 * at(-e[i]) - at(-2 * e[i])
        ) / (12 * h * h)
        for j in range(i + 1, 3):
            acc = 0.0
            for ki, wi in weights.items():
                for kj, wj in weights.items():
                    acc += wi * wj * at(ki * e[i] + kj * e[j])
            hess[i, j] = hess[j, i] = acc / (144 * h * h)
    return grad, hess
