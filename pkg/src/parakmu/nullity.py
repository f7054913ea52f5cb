"""h-frames and extraction of the nullity functions (kappa, mu, nu) from curvature.

In an h-frame {xi, X, phi X} with g(X, X) = -1 and g(phi X, phi X) = 1:

* ``kappa_gt`` (h1 type, kappa > -1): h X = lam X, h phi X = -lam phi X,
  lam = sqrt(1 + kappa);
* ``kappa_lt`` (h3 type, kappa < -1): h X = lam phi X, h phi X = -lam X,
  lam = sqrt(-1 - kappa).

The nullity condition R(Z, xi) xi = kappa Z + mu h Z + nu phi h Z, applied to
Z = X and Z = phi X, gives four linear equations in (kappa, mu, nu).  They are
solved on jets so the extracted functions keep one order of derivatives.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from . import chart, jets
from .jets import Jet
from .structure import (
    H_TYPE_TOL,
    LAMBDA_MIN,
    LocalStructure,
    ParacontactStructure,
    h_invariants,
)

FRAME_SIGNS = (1.0, -1.0, 1.0)  # xi, X, phi X
COND_MAX = 1e10
ORIENTATION_EPS = 1e-12
NULLITY_COLUMNS = ("x", "y", "z", "kappa", "mu", "nu", "lambda", "A", "B", "residual")


class FrameError(ArithmeticError):
    pass


class H2TypeUnsupported(FrameError):
    pass


class DegenerateH(FrameError):
    pass


class FrameFailure(FrameError):
    pass


class IllConditionedSolve(FrameError):
    pass


class RegimeMismatch(ValueError):
    pass


@dataclass(frozen=True)
class HFrame:
    X: Jet
    phiX: Jet
    lam: Jet
    regime: str  # kappa_gt | kappa_lt
    signs: tuple = FRAME_SIGNS

    def flipped(self) -> "HFrame":
        """The same frame with X -> -X (and so phi X -> -phi X)."""
        return HFrame(-self.X, -self.phiX, self.lam, self.regime, self.signs)

    def residuals(self, loc: LocalStructure) -> dict[str, np.ndarray]:
        """Defects of the h-frame relations and of orthonormality."""
        X, P, xi, lam = self.X, self.phiX, loc.xi, self.lam
        hX, hP = loc.h_of(X), loc.h_of(P)
        if self.regime == "kappa_gt":
            rel1, rel2 = hX - X * lam, hP + P * lam
        else:
            rel1, rel2 = hX - P * lam, hP + X * lam
        out = {
            "h_X": _norm(rel1.value),
            "h_phiX": _norm(rel2.value),
            "h_xi": _norm(loc.h_of(xi).value),
            "phiX": _norm((loc.phi_of(X) - P).value),
        }
        vecs = (xi, X, P)
        gram = 0.0
        for i in range(3):
            for j in range(3):
                target = self.signs[i] if i == j else 0.0
                gram = np.maximum(gram, np.abs(loc.inner(vecs[i], vecs[j]).value - target))
        out["orthonormal"] = gram
        return out


def _norm(v: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(v)).max(axis=0)


def _orient(X: Jet) -> np.ndarray:
    """+1 or -1 per point so that the first nonzero component of X, taken in the
    order d/dz, d/dy, d/dx, is positive."""
    v = X.value
    scale = np.abs(v).max(axis=0)
    sign = np.zeros(v.shape[1:])
    for i in (2, 1, 0):
        undecided = sign == 0
        big = np.abs(v[i]) > ORIENTATION_EPS * np.maximum(scale, 1.0)
        sign = np.where(undecided & big, np.sign(v[i]), sign)
    return np.where(sign == 0, 1.0, sign)


def frame_at(loc: LocalStructure, tol: float = H_TYPE_TOL) -> HFrame:
    """h-frame at every point of ``loc`` (all points must share one regime)."""
    inv = h_invariants(loc)
    X0, P0 = inv.pair
    c, defect, norm = (np.atleast_1d(np.asarray(a, dtype=float)) for a in (inv.c, inv.scalar_defect, inv.norm))
    if np.any(norm <= tol):
        raise DegenerateH("h vanishes: no h-frame exists")
    if np.any(defect > tol * np.maximum(1.0, np.abs(c))):
        raise DegenerateH("h^2 is not a scalar on ker eta within tolerance")
    small = tol * norm * norm
    if np.any(np.abs(c) <= small):
        raise H2TypeUnsupported("h^2 = 0 with h != 0 (h2 type): no h-frame exists")
    if np.all(c > small):
        regime, num, den = "kappa_gt", inv.q, inv.p
    elif np.all(c < -small):
        regime, num, den = "kappa_lt", inv.p, inv.q
    else:
        raise FrameFailure("points of both regimes in one batch")
    if np.any(np.atleast_1d(den.value) <= 0):
        which = "timelike eigenvector has a negative eigenvalue" if regime == "kappa_gt" else "g(hX, phi X) < 0"
        raise FrameFailure(f"no h-frame with lambda > 0 and the signs (xi:+, X:-, phi X:+): {which}")
    # hyperbolic rotation of (X0, phi X0) by t with tanh(2t) = u
    u = num / den
    root = jets.sqrt(1.0 - u * u)
    cosh2 = jets.reciprocal(root)
    sinh2 = u * cosh2
    cosh1 = jets.sqrt((cosh2 + 1.0) * 0.5)
    sinh1 = sinh2 / (cosh1 * 2.0)
    X = X0 * cosh1 + P0 * sinh1
    lam = den * root
    flip = _orient(X)
    X = X * Jet.constant(flip)
    return HFrame(X, loc.phi_of(X), lam, regime)


def build_h_frame(s: ParacontactStructure, p, tol: float = H_TYPE_TOL) -> HFrame:
    """h-frame of ``s`` at a point (or a batch of points)."""
    return frame_at(s.at(p), tol)


# extraction ------------------------------------------------------------------------

@dataclass(frozen=True)
class NullityCoefficients:
    """Jet-valued nullity functions and frame data at a point batch."""

    kappa: Jet
    mu: Jet | None
    nu: Jet | None
    lam: Jet
    A: Jet | None
    B: Jet | None
    residual: np.ndarray
    regime: str | None
    frame: HFrame | None
    h_zero: bool = False

    def values(self) -> dict[str, np.ndarray]:
        nan = np.full(np.shape(self.residual), np.nan)
        pick = lambda j: nan if j is None else np.asarray(j.value, dtype=float)  # noqa: E731
        return {
            "kappa": pick(self.kappa),
            "mu": pick(self.mu),
            "nu": pick(self.nu),
            "lambda": pick(self.lam),
            "A": pick(self.A),
            "B": pick(self.B),
            "residual": np.asarray(self.residual, dtype=float),
        }


def _system(regime: str, lam: Jet):
    zero = lam * 0.0
    one = zero + 1.0
    if regime == "kappa_gt":
        return [[one, lam, zero], [zero, zero, lam], [zero, zero, -lam], [one, -lam, zero]]
    return [[one, zero, lam], [zero, lam, zero], [zero, -lam, zero], [one, zero, -lam]]


def _det3(m):
    return (
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    )


def solve_least_squares(M: Sequence[Sequence[Jet]], rhs: Sequence[Jet]):
    """Normal-equation least squares on jets, with a condition-number guard.

    Returns the solution (list of jets) and the max absolute leftover per point.
    """
    rows, cols = len(M), len(M[0])
    N = [[jets.jsum(jets.stack([M[k][i] * M[k][j] for k in range(rows)])) for j in range(cols)] for i in range(cols)]
    t = [jets.jsum(jets.stack([M[k][i] * rhs[k] for k in range(rows)])) for i in range(cols)]
    Nv = np.array([[np.broadcast_to(N[i][j].value, np.shape(rhs[0].value)) for j in range(cols)] for i in range(cols)])
    mats = np.moveaxis(Nv.reshape(cols, cols, -1), -1, 0)
    cond = np.linalg.cond(mats)
    if np.any(~np.isfinite(cond)) or np.any(cond > COND_MAX):
        raise IllConditionedSolve(f"normal equations have condition number {np.nanmax(cond):.3g} > {COND_MAX:g}")
    # Jacobi scaling keeps Cramer's rule well away from the division guard
    d = [jets.reciprocal(jets.sqrt(N[i][i])) for i in range(cols)]
    Ns = [[N[i][j] * d[i] * d[j] for j in range(cols)] for i in range(cols)]
    ts = [t[i] * d[i] for i in range(cols)]
    inv_det = jets.reciprocal(_det3(Ns))
    sol = []
    for k in range(cols):
        Mk = [[ts[i] if j == k else Ns[i][j] for j in range(cols)] for i in range(cols)]
        sol.append(_det3(Mk) * inv_det * d[k])
    leftover = 0.0
    for r in range(rows):
        fit = sum((M[r][j] * sol[j] for j in range(1, cols)), M[r][0] * sol[0])
        leftover = np.maximum(leftover, np.abs((fit - rhs[r]).value))
    return sol, leftover


class Nullity:
    """Nullity extraction and derived quantities at a point batch (cached)."""

    def __init__(self, loc: LocalStructure, frame: HFrame | None = None):
        self.loc = loc
        self._frame = frame

    @cached_property
    def frame(self) -> HFrame:
        return self._frame if self._frame is not None else frame_at(self.loc)

    @cached_property
    def riemann(self) -> Jet:
        return chart.riemann_tensor(self.loc.gamma)

    def curvature_xi_xi(self, Z: Jet) -> Jet:
        """R(Z, xi) xi from the coordinate Riemann tensor."""
        return _rxx(self.riemann, Z, self.loc.xi)

    @cached_property
    def coefficients(self) -> NullityCoefficients:
        loc, fr = self.loc, self.frame
        vecs = [fr.X, fr.phiX, loc.xi]
        c1 = chart.frame_components(vecs, self.curvature_xi_xi(fr.X))
        c2 = chart.frame_components(vecs, self.curvature_xi_xi(fr.phiX))
        rhs = [c1[0], c1[1], c2[0], c2[1]]
        (kappa, mu, nu), leftover = solve_least_squares(_system(fr.regime, fr.lam), rhs)
        residual = np.maximum(leftover, np.maximum(np.abs(c1[2].value), np.abs(c2[2].value)))
        A = chart.directional(fr.X, fr.lam)
        B = chart.directional(fr.phiX, fr.lam)
        return NullityCoefficients(kappa, mu, nu, fr.lam, A, B, residual, fr.regime, fr)


def _rxx(Rm: Jet, Z: Jet, xi: Jet) -> Jet:
    # Rm[l, k, i, j]: R(d_i, d_j) d_k = Rm[l, k, i, j] d_l
    t = jets.einsum("lkij...,i...->lkj...", Rm, Z)
    t = jets.einsum("lkj...,j...->lk...", t, xi)
    return jets.einsum("lk...,k...->l...", t, xi)


def nullity_at(loc: LocalStructure, frame: HFrame | None = None) -> NullityCoefficients:
    """Extract (kappa, mu, nu) on ``loc``; for h = 0 returns kappa only with ``h_zero``."""
    try:
        return Nullity(loc, frame).coefficients
    except DegenerateH:
        inv = h_invariants(loc)
        if np.any(np.atleast_1d(inv.norm) > H_TYPE_TOL):
            raise
    # h = 0: R(Z, xi) xi = kappa Z on ker eta; mu and nu are undetermined
    X0, P0 = h_invariants(loc).pair
    vecs = [X0, P0, loc.xi]
    Rm = chart.riemann_tensor(loc.gamma)
    c1 = chart.frame_components(vecs, _rxx(Rm, X0, loc.xi))
    c2 = chart.frame_components(vecs, _rxx(Rm, P0, loc.xi))
    kappa = (c1[0] + c2[1]) * 0.5
    residual = np.maximum.reduce(
        [np.abs((c1[0] - c2[1]).value) * 0.5, np.abs(c1[1].value), np.abs(c2[0].value), np.abs(c1[2].value), np.abs(c2[2].value)]
    )
    zero = kappa * 0.0 + 0.0
    return NullityCoefficients(kappa, None, None, zero, None, None, residual, None, None, h_zero=True)


def extract_nullity(s: ParacontactStructure, p, frame: HFrame | None = None) -> NullityCoefficients:
    return nullity_at(s.at(p), frame)


# derived quantities -----------------------------------------------------------------

def directional_invariants(s: ParacontactStructure, p) -> dict[str, np.ndarray]:
    """xi(kappa), xi(mu), A, B and the defects of X mu, phi X mu and h grad mu = grad kappa."""
    loc = s.at(p)
    return invariants_at(loc, Nullity(loc).coefficients)


def invariants_at(loc: LocalStructure, nc: NullityCoefficients) -> dict[str, np.ndarray]:
    fr = nc.frame
    xi_kappa = chart.directional(loc.xi, nc.kappa).value
    xi_mu = chart.directional(loc.xi, nc.mu).value
    Xmu = chart.directional(fr.X, nc.mu).value
    Pmu = chart.directional(fr.phiX, nc.mu).value
    A, B = nc.A.value, nc.B.value
    if fr.regime == "kappa_gt":
        eq8, eq9 = Xmu - 2 * A, Pmu + 2 * B
    else:
        eq8, eq9 = Xmu - 2 * B, Pmu + 2 * A
    grad_mu = chart.gradient_field(loc.ginv, nc.mu)
    grad_kappa = chart.gradient_field(loc.ginv, nc.kappa)
    eq7 = _norm((loc.h_of(grad_mu) - grad_kappa).value)
    return {
        "xi_kappa": xi_kappa,
        "xi_mu": xi_mu,
        "A": A,
        "B": B,
        "eq7": eq7,
        "eq8": np.abs(eq8),
        "eq9": np.abs(eq9),
    }


@dataclass(frozen=True)
class BranchResult:
    branch: np.ndarray  # plus | minus | degenerate per point
    F_residual: np.ndarray
    plus_residual: np.ndarray
    minus_residual: np.ndarray


def classify_branch(lam, mu, lam_min: float = LAMBDA_MIN) -> BranchResult:
    """Branch of mu = 2(1 +/- lam) from values of lambda and mu."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    plus = np.abs(mu - 2 * (1 + lam))
    minus = np.abs(mu - 2 * (1 - lam))
    F = (1 + lam - mu / 2) * (1 - lam - mu / 2)
    branch = np.where(plus <= minus, "plus", "minus")
    branch = np.where(lam < lam_min, "degenerate", branch)
    return BranchResult(branch, np.abs(F), plus, minus)


def mu_branch_classify(s: ParacontactStructure, p, lam_min: float = LAMBDA_MIN) -> BranchResult:
    nc = extract_nullity(s, p)
    if nc.regime != "kappa_gt":
        raise RegimeMismatch("the mu-branch dichotomy applies only where kappa > -1")
    return classify_branch(nc.lam.value, nc.mu.value, lam_min)


# CSV ----------------------------------------------------------------------------------

def nullity_rows(s: ParacontactStructure, points) -> list[dict]:
    """Per-point rows of NULLITY_COLUMNS; points whose extraction fails are skipped."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    try:
        vals = extract_nullity(s, pts).values()
        return [_row(q, vals, k) for k, q in enumerate(pts)]
    except (FrameError, jets.JetError):
        pass
    rows = []
    for q in pts:
        try:
            vals = extract_nullity(s, q[None, :]).values()
        except (FrameError, jets.JetError):
            continue
        rows.append(_row(q, vals, 0))
    return rows


def _row(q, vals, k) -> dict:
    row = {"x": q[0], "y": q[1], "z": q[2]}
    for name in NULLITY_COLUMNS[3:]:
        row[name] = float(np.atleast_1d(vals[name])[k])
    return row


def write_nullity_csv(rows: Iterable[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(NULLITY_COLUMNS)
    for row in rows:
        w.writerow([repr(float(row[c])) for c in NULLITY_COLUMNS])


def nullity_csv(rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    write_nullity_csv(rows, buf)
    return buf.getvalue()
