"""Tensor calculus on a single 3-dimensional chart, evaluated on jets.

Every tensor here is a :class:`~parakmu.jets.Jet` whose tensor axes come first
and whose (optional) point batch comes last, e.g. a metric has shape
``(3, 3)`` or ``(3, 3, N)``.  Vector components are contravariant in the
coordinate basis, one-form components covariant, and a (1,1)-tensor ``T`` is
stored as ``T[row, col]`` so that ``(T v)^k = T[k, j] v^j``.

Curvature follows ``R(X, Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import jets
from .jets import Jet

DEGENERACY_EPS = 1e-10

Field = Callable[[Jet, Jet, Jet], Jet]


class DegenerateMetric(ArithmeticError):
    pass


def evaluate(field: Field, points) -> Jet:
    """Evaluate a closed-form field at one point ``(3,)`` or a batch ``(N, 3)``."""
    return Jet.lift(field(*jets.seed(points)))


def basis_vector(i: int, like: Jet | None = None) -> Jet:
    v = np.zeros(3)
    v[i] = 1.0
    if like is not None and like.shape[1:]:
        v = np.broadcast_to(v.reshape((3,) + (1,) * (len(like.shape) - 1)), (3,) + like.shape[1:])
    return Jet.constant(v)


# algebra ------------------------------------------------------------------

def matvec(T: Jet, v: Jet) -> Jet:
    return jets.einsum("ij...,j...->i...", T, v)


def matmul(A: Jet, B: Jet) -> Jet:
    return jets.einsum("ij...,jk...->ik...", A, B)


def contract(a: Jet, b: Jet) -> Jet:
    """Pairing of a one-form with a vector (or two vectors componentwise)."""
    return jets.einsum("i...,i...->...", a, b)


def inner(g: Jet, X: Jet, Y: Jet) -> Jet:
    return contract(X, matvec(g, Y))


def lower(g: Jet, X: Jet) -> Jet:
    return matvec(g, X)


def directional(X: Jet, f: Jet) -> Jet:
    """X(f) = X^i d_i f for a scalar or componentwise for a tensor ``f``."""
    terms = [X[i] * f.d(i) for i in range(3)]
    return terms[0] + terms[1] + terms[2]


def partials(T: Jet) -> Jet:
    """Stack of coordinate partials with the derivative index first."""
    return jets.stack([T.d(i) for i in range(3)])


# metric ---------------------------------------------------------------------

def determinant(g: Jet) -> Jet:
    return (
        g[0, 0] * (g[1, 1] * g[2, 2] - g[1, 2] * g[2, 1])
        - g[0, 1] * (g[1, 0] * g[2, 2] - g[1, 2] * g[2, 0])
        + g[0, 2] * (g[1, 0] * g[2, 1] - g[1, 1] * g[2, 0])
    )


def metric_inverse(g: Jet, eps: float = DEGENERACY_EPS) -> Jet:
    """Inverse metric via the adjugate; raises :class:`DegenerateMetric` if |det g| <= eps."""
    det = determinant(g)
    if np.any(np.abs(det.value) <= eps):
        raise DegenerateMetric(f"|det g| <= {eps:g} at some sampled point")
    cof = [[None] * 3 for _ in range(3)]
    for i in range(3):
        for j in range(3):
            r = [k for k in range(3) if k != i]
            c = [k for k in range(3) if k != j]
            minor = g[r[0], c[0]] * g[r[1], c[1]] - g[r[0], c[1]] * g[r[1], c[0]]
            cof[i][j] = minor if (i + j) % 2 == 0 else -minor
    inv_det = jets.reciprocal(det, eps)
    # inverse = adjugate / det, adjugate = transpose of cofactor matrix
    return jets.stack([jets.stack([cof[j][i] * inv_det for j in range(3)]) for i in range(3)])


def signature(g_value: np.ndarray) -> tuple[int, int]:
    """(#positive, #negative) eigenvalues of a value-level metric (3, 3) matrix."""
    w = np.linalg.eigvalsh(g_value)
    return int(np.sum(w > 0)), int(np.sum(w < 0))


def check_signature(g: Jet, expected: tuple[int, int] = (2, 1)) -> np.ndarray:
    """Boolean per point: metric has the expected signature (batch-aware)."""
    vals = np.moveaxis(np.asarray(g.value), (0, 1), (-2, -1))
    w = np.linalg.eigvalsh(vals)
    pos = np.sum(w > 0, axis=-1)
    neg = np.sum(w < 0, axis=-1)
    return (pos == expected[0]) & (neg == expected[1])


# connection -------------------------------------------------------------------

def christoffel(g: Jet, ginv: Jet | None = None) -> Jet:
    """Levi-Civita symbols ``Gamma[k, i, j]`` (symmetric in i, j)."""
    if ginv is None:
        ginv = metric_inverse(g)
    dg = partials(g)  # dg[l, i, j] = d_l g_ij
    # lowered[l, i, j] = 1/2 (d_i g_jl + d_j g_il - d_l g_ij)
    lowered = Jet(
        0.5
        * (
            np.einsum("nijl...->nlij...", dg.c)
            + np.einsum("njil...->nlij...", dg.c)
            - dg.c
        ),
        dg.order,
    )
    return jets.einsum("kl...,lij...->kij...", ginv, lowered)


def covariant_derivative(gamma: Jet, X: Jet, Y: Jet) -> Jet:
    """nabla_X Y = X^i (d_i Y^k + Gamma^k_ij Y^j)."""
    conn = jets.einsum("kij...,j...->ki...", gamma, Y)
    dY = partials(Y)  # dY[i, k]
    total = Jet(np.swapaxes(dY.c, 1, 2), dY.order) + conn  # [k, i]
    return matvec(total, X)


def lie_bracket(X: Jet, Y: Jet) -> Jet:
    return directional(X, Y) - directional(Y, X)


def lie_derivative_tensor11(xi: Jet, T: Jet) -> Jet:
    """(L_xi T)(e_j) = [xi, T e_j] - T [xi, e_j] for each coordinate basis vector."""
    cols = []
    for j in range(3):
        e = basis_vector(j, xi)
        cols.append(lie_bracket(xi, matvec(T, e)) - matvec(T, lie_bracket(xi, e)))
    return jets.stack(cols, axis=1)


def riemann_apply(gamma: Jet, X: Jet, Y: Jet, Z: Jet) -> Jet:
    """R(X, Y)Z by nested covariant differentiation of the vector fields."""
    nyz = covariant_derivative(gamma, Y, Z)
    nxz = covariant_derivative(gamma, X, Z)
    return (
        covariant_derivative(gamma, X, nyz)
        - covariant_derivative(gamma, Y, nxz)
        - covariant_derivative(gamma, lie_bracket(X, Y), Z)
    )


def riemann_tensor(gamma: Jet) -> Jet:
    """Components ``Rm[l, k, i, j]`` with ``R(d_i, d_j) d_k = Rm[l, k, i, j] d_l``."""
    dG = partials(gamma)  # dG[m, l, a, b] = d_m Gamma^l_ab
    # d_i Gamma^l_jk - d_j Gamma^l_ik
    term1 = np.einsum("niljk...->nlkij...", dG.c) - np.einsum("njlik...->nlkij...", dG.c)
    quad = jets.einsum("lim...,mjk...->lkij...", gamma, gamma)
    quad_c = quad.c - np.einsum("nlkji...->nlkij...", quad.c)
    return Jet(term1 + quad_c, min(dG.order, quad.order))


def ricci_and_scalar(g: Jet, gamma: Jet | None = None, ginv: Jet | None = None):
    """Ricci operator Q (as a (1,1) matrix) and scalar curvature tau = tr Q.

    ``Q Y = sum_ij g^ij R(Y, d_i) d_j``, the coordinate form of
    ``sum eps_a R(Y, e_a) e_a`` over any signed orthonormal frame.
    """
    if ginv is None:
        ginv = metric_inverse(g)
    if gamma is None:
        gamma = christoffel(g, ginv)
    Rm = riemann_tensor(gamma)  # R(d_b, d_i) d_j = Rm[a, j, b, i] d_a
    arranged = Jet(np.einsum("najbi...->nabij...", Rm.c), Rm.order)
    Q = jets.einsum("abij...,ij...->ab...", arranged, ginv)
    tau = Q[0, 0] + Q[1, 1] + Q[2, 2]
    return Q, tau


def ricci_operator_frame(g: Jet, gamma: Jet, frame: "SignedFrame") -> tuple[Jet, Jet]:
    """Q and tau by contracting riemann_apply over a signed orthonormal frame.

    Returns Q as a (1,1) matrix in coordinates: columns ``Q d_b``.
    """
    cols = []
    for b in range(3):
        e_b = basis_vector(b, frame.vectors[0])
        acc = None
        for eps, e in zip(frame.signs, frame.vectors):
            term = riemann_apply(gamma, e_b, e, e) * float(eps)
            acc = term if acc is None else acc + term
        cols.append(acc)
    Q = jets.stack(cols, axis=1)
    tau = None
    for eps, e in zip(frame.signs, frame.vectors):
        t = inner(g, matvec(Q, e), e) * float(eps)
        tau = t if tau is None else tau + t
    return Q, tau


def gradient_field(ginv: Jet, f: Jet) -> Jet:
    """(grad f)^i = g^ij d_j f."""
    df = jets.stack([f.d(j) for j in range(3)])
    return matvec(ginv, df)


def hessian_trace(ginv: Jet, gamma: Jet, f: Jet) -> Jet:
    """Coordinate Laplacian g^ij (d_i d_j f - Gamma^k_ij d_k f)."""
    df = jets.stack([f.d(k) for k in range(3)])
    ddf = jets.stack([jets.stack([f.d(i).d(j) for j in range(3)]) for i in range(3)])
    hess = ddf - jets.einsum("kij...,k...->ij...", gamma, df)
    return jets.einsum("ij...,ij...->...", ginv, hess)


@dataclass(frozen=True)
class SignedFrame:
    """Pointwise pseudo-orthonormal frame ``e_1, e_2, e_3`` with ``g(e_i, e_i) = signs[i]``."""

    vectors: tuple[Jet, Jet, Jet]
    signs: tuple[int, int, int]

    def gram_residual(self, g: Jet) -> np.ndarray:
        worst = None
        for i, a in enumerate(self.vectors):
            for j, b in enumerate(self.vectors):
                target = self.signs[i] if i == j else 0.0
                r = np.abs(inner(g, a, b).value - target)
                worst = r if worst is None else np.maximum(worst, r)
        return worst


def laplacian_signed_frame(g: Jet, gamma: Jet, frame: SignedFrame, f: Jet, ginv: Jet | None = None):
    """Signed frame Laplacian ``sum eps_i (e_i e_i f - (nabla_{e_i} e_i) f)``.

    Returns ``(frame_value, divergence_value)``; the second is the coordinate
    form ``g^ij (d_i d_j f - Gamma^k_ij d_k f)`` for cross-checking.
    """
    if ginv is None:
        ginv = metric_inverse(g)
    acc = None
    for eps, e in zip(frame.signs, frame.vectors):
        first = directional(e, f)
        term = directional(e, first) - directional(covariant_derivative(gamma, e, e), f)
        term = term * float(eps)
        acc = term if acc is None else acc + term
    return acc, hessian_trace(ginv, gamma, f)


def exterior_derivative_oneform(eta: Jet, X: Jet, Y: Jet, half: bool = True) -> Jet:
    """d eta(X, Y); ``half=True`` uses the 1/2 (X eta(Y) - Y eta(X) - eta([X,Y])) normalization."""
    full = directional(X, contract(eta, Y)) - directional(Y, contract(eta, X)) - contract(eta, lie_bracket(X, Y))
    return full * 0.5 if half else full


def frame_components(frame_vectors: Sequence[Jet], v: Jet) -> Jet:
    """Coefficients of ``v`` in a (not necessarily orthonormal) vector frame."""
    M = jets.stack(list(frame_vectors), axis=1)
    return matvec(matrix_inverse(M), v)


def matrix_inverse(M: Jet, eps: float = DEGENERACY_EPS) -> Jet:
    """Inverse of a general 3x3 jet matrix (adjugate formula)."""
    det = determinant(M)
    if np.any(np.abs(det.value) <= eps):
        raise DegenerateMetric("singular frame matrix")
    inv_det = jets.reciprocal(det, eps)
    rows = []
    for i in range(3):
        row = []
        for j in range(3):
            r = [k for k in range(3) if k != j]
            c = [k for k in range(3) if k != i]
            minor = M[r[0], c[0]] * M[r[1], c[1]] - M[r[0], c[1]] * M[r[1], c[0]]
            row.append((minor if (i + j) % 2 == 0 else -minor) * inv_det)
        rows.append(jets.stack(row))
    return jets.stack(rows)
