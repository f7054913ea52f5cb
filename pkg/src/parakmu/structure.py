"""Paracontact metric structures on a chart and their pointwise checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from . import chart, jets
from .jets import Jet

H_TYPE_TOL = 1e-7
LAMBDA_MIN = 1e-3


class OutOfDomain(ValueError):
    pass


class NonpositiveAlpha(ValueError):
    pass


class Tensors(NamedTuple):
    phi: Jet
    xi: Jet
    eta: Jet
    g: Jet


TensorFields = Callable[[Jet, Jet, Jet], Tensors]


@dataclass(frozen=True)
class Domain:
    """Open coordinate box (``None`` = unbounded) minus named loci such as ``"z=0"``."""

    box: tuple = ((None, None), (None, None), (None, None))
    excluded: tuple = ()

    def contains(self, points) -> np.ndarray:
        p = np.atleast_2d(np.asarray(points, dtype=float))
        mask = np.all(np.isfinite(p), axis=1)
        for axis, (lo, hi) in enumerate(self.box):
            if lo is not None:
                mask &= p[:, axis] > lo
            if hi is not None:
                mask &= p[:, axis] < hi
        for locus in self.excluded:
            name, _, val = locus.partition("=")
            axis = "xyz".index(name.strip())
            mask &= np.abs(p[:, axis] - float(val)) > 1e-12
        return mask

    def to_dict(self) -> dict:
        return {"box": [list(b) for b in self.box], "excluded": list(self.excluded)}

    @classmethod
    def from_dict(cls, d: dict) -> "Domain":
        return cls(tuple(tuple(b) for b in d["box"]), tuple(d.get("excluded", ())))


@dataclass(frozen=True)
class ParacontactStructure:
    """Closed-form (phi, xi, eta, g) on a chart domain.

    ``reference_lambda`` optionally gives the eigenvalue function the
    structure was built with, as a map from the coordinate jets to a jet.
    """

    label: str
    tensors: TensorFields
    domain: Domain = field(default_factory=Domain)
    manifest: dict = field(default_factory=dict, compare=False)
    reference_lambda: Callable | None = field(default=None, compare=False)

    def at(self, points) -> "LocalStructure":
        p = np.asarray(points, dtype=float)
        single = p.ndim == 1
        p2 = np.atleast_2d(p)
        inside = self.domain.contains(p2)
        if not np.all(inside):
            bad = p2[~inside][0]
            raise OutOfDomain(f"point {tuple(bad)} is outside the domain of {self.label!r}")
        return LocalStructure(self, p if single else p2)


class LocalStructure:
    """A structure evaluated (as jets) at one point or a batch of points."""

    def __init__(self, structure: ParacontactStructure, points: np.ndarray):
        self.structure = structure
        self.points = points
        self.coords = jets.seed(points)
        t = structure.tensors(*self.coords)
        batch = self.coords[0].shape
        self.phi = _broadcast(t.phi, (3, 3) + batch)
        self.xi = _broadcast(t.xi, (3,) + batch)
        self.eta = _broadcast(t.eta, (3,) + batch)
        self.g = _broadcast(t.g, (3, 3) + batch)

    @property
    def batch_shape(self) -> tuple:
        return self.coords[0].shape

    @cached_property
    def ginv(self) -> Jet:
        return chart.metric_inverse(self.g)

    @cached_property
    def gamma(self) -> Jet:
        return chart.christoffel(self.g, self.ginv)

    @cached_property
    def h(self) -> Jet:
        return compute_h_jet(self)

    @cached_property
    def ricci(self) -> tuple[Jet, Jet]:
        return chart.ricci_and_scalar(self.g, self.gamma, self.ginv)

    def basis(self, i: int) -> Jet:
        return chart.basis_vector(i, self.xi)

    def eta_of(self, v: Jet) -> Jet:
        return chart.contract(self.eta, v)

    def phi_of(self, v: Jet) -> Jet:
        return chart.matvec(self.phi, v)

    def h_of(self, v: Jet) -> Jet:
        return chart.matvec(self.h, v)

    def inner(self, a: Jet, b: Jet) -> Jet:
        return chart.inner(self.g, a, b)


def _broadcast(t: Jet, shape: tuple) -> Jet:
    t = Jet.lift(t)
    if t.shape == shape:
        return t
    return Jet(np.broadcast_to(t.c, (jets.NCOEF,) + shape).copy(), t.order)


def _vmax(arr: np.ndarray, ntensor: int) -> np.ndarray:
    """Max |.| over the leading ``ntensor`` axes, leaving the batch axes."""
    a = np.abs(np.asarray(arr))
    for _ in range(ntensor):
        a = a.max(axis=0)
    return a


def outer(a: Jet, b: Jet) -> Jet:
    return jets.einsum("i...,j...->ij...", a, b)


def transpose(T: Jet) -> Jet:
    return Jet(np.swapaxes(T.c, 1, 2), T.order)


def identity_like(loc: LocalStructure) -> Jet:
    return jets.stack([loc.basis(i) for i in range(3)], axis=1)


# axioms -----------------------------------------------------------------------

def compute_h_jet(loc: LocalStructure) -> Jet:
    return chart.lie_derivative_tensor11(loc.xi, loc.phi) * 0.5


def compute_h(s: ParacontactStructure, p) -> np.ndarray:
    """h = 1/2 L_xi phi at ``p`` as a value-level 3x3 matrix (or (3, 3, N) batch)."""
    return s.at(p).h.value


def _eigen_balance(phi_val: np.ndarray) -> np.ndarray:
    mats = np.moveaxis(np.asarray(phi_val), (0, 1), (-2, -1))
    w = np.sort(np.linalg.eigvals(mats), axis=-1)
    target = np.array([-1.0, 0.0, 1.0])
    return np.abs(w - target).max(axis=-1)


def axiom_residuals(loc: LocalStructure) -> dict[str, np.ndarray]:
    """Per-point residual arrays for the paracontact metric axioms and h identities."""
    phi, xi, eta, g = loc.phi, loc.xi, loc.eta, loc.g
    eye = identity_like(loc)
    out: dict[str, np.ndarray] = {}
    out["eta_xi"] = np.abs(loc.eta_of(xi).value - 1.0)
    out["phi_squared"] = _vmax((chart.matmul(phi, phi) - (eye - outer(xi, eta))).value, 2)
    out["phi_xi"] = _vmax(loc.phi_of(xi).value, 1)
    out["eta_phi"] = _vmax(jets.einsum("i...,ij...->j...", eta, phi).value, 1)
    gm = chart.matmul(transpose(phi), chart.matmul(g, phi)) - (outer(eta, eta) - g)
    out["g_metric"] = _vmax(gm.value, 2)
    out["eta_dual"] = _vmax((chart.matvec(g, xi) - eta).value, 1)
    basis = [loc.basis(i) for i in range(3)]
    contact = None
    for i in range(3):
        for j in range(3):
            lhs = chart.exterior_derivative_oneform(eta, basis[i], basis[j], half=True)
            rhs = chart.inner(g, basis[i], loc.phi_of(basis[j]))
            r = np.abs((lhs - rhs).value)
            contact = r if contact is None else np.maximum(contact, r)
    out["contact"] = contact
    out["contact_volume"] = (np.abs(contact_volume(loc)) <= 1e-8).astype(float)
    out["signature"] = (~chart.check_signature(g)).astype(float)
    out["eigen_balance"] = _eigen_balance(phi.value)
    return out


def contact_volume(loc: LocalStructure) -> np.ndarray:
    """Coefficient of dx^dy^dz in eta ^ d eta, with the unnormalized exterior derivative."""
    eta = loc.eta
    # (d eta)_ij = d_i eta_j - d_j eta_i
    deta = [[(eta[j].d(i) - eta[i].d(j)).value for j in range(3)] for i in range(3)]
    e = eta.value
    return e[0] * deta[1][2] + e[1] * deta[2][0] + e[2] * deta[0][1]


def h_residuals(loc: LocalStructure) -> dict[str, np.ndarray]:
    h, phi = loc.h, loc.phi
    out = {}
    out["h_xi"] = _vmax(loc.h_of(loc.xi).value, 1)
    out["h_trace"] = np.abs((h[0, 0] + h[1, 1] + h[2, 2]).value)
    hp = chart.matmul(h, phi)
    out["h_phi_trace"] = np.abs((hp[0, 0] + hp[1, 1] + hp[2, 2]).value)
    out["h_anticommute"] = _vmax((hp + chart.matmul(phi, h)).value, 2)
    gh = chart.matmul(loc.g, h)
    out["h_symmetric"] = _vmax((gh - transpose(gh)).value, 2)
    return out


def check_structure_axioms(s: ParacontactStructure, p) -> dict[str, float]:
    """Named axiom residuals at a single point ``p``."""
    res = axiom_residuals(s.at(p))
    return {k: float(v) for k, v in res.items()}


def nabla_xi_residual(loc: LocalStructure) -> np.ndarray:
    worst = None
    for i in range(3):
        e = loc.basis(i)
        lhs = chart.covariant_derivative(loc.gamma, e, loc.xi)
        rhs = -loc.phi_of(e) + loc.phi_of(loc.h_of(e))
        r = _vmax((lhs - rhs).value, 1)
        worst = r if worst is None else np.maximum(worst, r)
    return worst


def check_nabla_xi(s: ParacontactStructure, p) -> float:
    return float(nabla_xi_residual(s.at(p)))


# h-type ------------------------------------------------------------------------

@dataclass(frozen=True)
class HType:
    kind: str  # h1 | h2 | h3 | zero | degenerate
    lam: float | None = None


class TimelikePair(NamedTuple):
    X: Jet  # unit timelike vector in ker eta
    PX: Jet  # phi X, unit spacelike


def timelike_unit(loc: LocalStructure) -> TimelikePair:
    """A unit timelike vector in ker eta, chosen per point from the coordinate basis.

    Each coordinate vector is projected to ker eta; the candidate with the
    largest |g(v, v)| wins.  A spacelike winner v is replaced by phi v, which
    is timelike with the same norm.
    """
    cands = []
    for i in range(3):
        e = loc.basis(i)
        v = e - loc.xi * loc.eta_of(e)
        cands.append((v, loc.inner(v, v)))
    norms = np.stack([np.abs(n.value) for _, n in cands])
    pick = np.argmax(norms, axis=0)
    v = cands[0][0]
    n = cands[0][1]
    for i in (1, 2):
        sel = pick == i
        v = jets.where(sel, cands[i][0], v)
        n = jets.where(sel, cands[i][1], n)
    spacelike = n.value > 0
    pv = loc.phi_of(v)
    w = jets.where(spacelike, pv, v)
    norm = jets.sqrt(jets.where(spacelike, n, -n))
    X = w * jets.reciprocal(norm)
    return TimelikePair(X, loc.phi_of(X))


class HInvariants(NamedTuple):
    pair: TimelikePair
    p: Jet  # -g(hX, X)
    q: Jet  # g(hX, phi X)
    c: np.ndarray  # scalar of h^2 on ker eta
    scalar_defect: np.ndarray
    norm: np.ndarray


def h_invariants(loc: LocalStructure) -> HInvariants:
    pair = timelike_unit(loc)
    X, P = pair
    hX, hP = loc.h_of(X), loc.h_of(P)
    p = -loc.inner(hX, X)
    q = loc.inner(hX, P)
    h2X, h2P = loc.h_of(hX), loc.h_of(hP)
    m11 = -loc.inner(h2X, X).value
    m21 = loc.inner(h2X, P).value
    m12 = -loc.inner(h2P, X).value
    m22 = loc.inner(h2P, P).value
    c = 0.5 * (m11 + m22)
    defect = np.maximum(np.maximum(np.abs(m12), np.abs(m21)), np.abs(m11 - m22))
    defect = np.maximum(defect, _vmax(loc.h_of(loc.xi).value, 1))
    norm = np.maximum(np.abs(p.value), np.abs(q.value))
    return HInvariants(pair, p, q, c, defect, norm)


def classify_values(c: float, defect: float, norm: float, tol: float = H_TYPE_TOL) -> HType:
    if norm <= tol:
        return HType("zero", 0.0)
    if defect > tol * max(1.0, abs(c)):
        return HType("degenerate")
    # |c| is compared with |h|^2 so that small but nonzero lambda is still h1/h3
    if c > tol * norm * norm:
        return HType("h1", math.sqrt(c))
    if c < -tol * norm * norm:
        return HType("h3", math.sqrt(-c))
    return HType("h2")


def classify_h_type(s: ParacontactStructure, p, tol: float = H_TYPE_TOL) -> HType:
    """Canonical form of h at a single point ``p``."""
    inv = h_invariants(s.at(np.asarray(p, dtype=float)))
    return classify_values(float(inv.c), float(inv.scalar_defect), float(inv.norm), tol)


# deformation --------------------------------------------------------------------

def d_homothetic_deform(s: ParacontactStructure, alpha: float) -> ParacontactStructure:
    """eta -> a eta, xi -> xi / a, phi -> phi, g -> a g + a (a - 1) eta (x) eta."""
    alpha = float(alpha)
    if not alpha > 0.0 or not math.isfinite(alpha):
        raise NonpositiveAlpha(f"deformation parameter must be positive, got {alpha}")
    base = s.tensors

    def tensors(x, y, z):
        t = base(x, y, z)
        eta = Jet.lift(t.eta)
        return Tensors(
            phi=t.phi,
            xi=Jet.lift(t.xi) * (1.0 / alpha),
            eta=eta * alpha,
            g=Jet.lift(t.g) * alpha + outer(eta, eta) * (alpha * (alpha - 1.0)),
        )

    ref = None
    if s.reference_lambda is not None:
        base_ref = s.reference_lambda

        def ref(x, y, z):
            # h scales like xi under the deformation
            return base_ref(x, y, z) * (1.0 / alpha)
    manifest = dict(s.manifest)
    manifest["deformations"] = list(s.manifest.get("deformations", [])) + [alpha]
    return replace(
        s,
        label=f"{s.label}|D{alpha:g}",
        tensors=tensors,
        manifest=manifest,
        reference_lambda=ref,
    )


def perturb_phi(s: ParacontactStructure, entry: tuple[int, int] = (1, 2), delta: float = 1e-3) -> ParacontactStructure:
    """Copy of ``s`` with one constant added to a single phi entry (negative control)."""
    base = s.tensors
    bump = np.zeros((3, 3))
    bump[entry] = delta

    def tensors(x, y, z):
        t = base(x, y, z)
        shape = x.shape
        add = Jet.constant(np.broadcast_to(bump.reshape((3, 3) + (1,) * len(shape)), (3, 3) + shape))
        return t._replace(phi=Jet.lift(t.phi) + add)

    manifest = dict(s.manifest)
    manifest["perturbation"] = {"phi_entry": list(entry), "delta": delta}
    return replace(s, label=f"{s.label}|perturbed", tensors=tensors, manifest=manifest)


# para-Sasakian necessary condition -----------------------------------------------

def para_sasakian_defect(loc: LocalStructure) -> np.ndarray:
    worst = None
    for i in range(3):
        for j in range(3):
            if i == j:
                continue
            ei, ej = loc.basis(i), loc.basis(j)
            R = chart.riemann_apply(loc.gamma, ei, ej, loc.xi)
            target = -(ei * loc.eta_of(ej) - ej * loc.eta_of(ei))
            r = _vmax((R - target).value, 1)
            worst = r if worst is None else np.maximum(worst, r)
    return worst


def para_sasakian_residual(s: ParacontactStructure, p) -> float:
    """Max defect of R(X,Y)xi = -(eta(Y)X - eta(X)Y) over coordinate pairs.

    A small value only means the curvature condition is met; it does not
    certify normality.
    """
    return float(para_sasakian_defect(s.at(p)))
