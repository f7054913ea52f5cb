"""Grid-evaluated check suites with deterministic reports.

Each entry compares a left side computed by direct tensor calculus
(Christoffel symbols, brackets, curvature) with a right side built from the
extracted kappa, mu, lambda, A and B.  The residual of an entry is the max over
the grid of the pointwise defect.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import sys
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__, chart, jets
from .chart import DegenerateMetric
from .jets import Jet
from .nullity import FRAME_SIGNS, FrameError, Nullity, classify_branch, invariants_at
from .structure import (
    LAMBDA_MIN,
    LocalStructure,
    ParacontactStructure,
    _vmax,
    axiom_residuals,
    d_homothetic_deform,
    h_invariants,
    h_residuals,
    nabla_xi_residual,
    outer,
    para_sasakian_defect,
)

REPORT_SCHEMA = "parakmu.report/1"
WORST_CAP = 10
DEFAULT_TOLERANCES = {
    "first": 1e-8,  # one derivative of the structure tensors
    "curvature": 1e-7,  # two or more derivatives
    "tau": 1e-6,  # scalar curvature formula
    "nu_bar": 1e-6,  # nu after a deformation
}
SUITES = ("axioms", "L1", "L2", "L3", "curvature", "main_theorem", "deformation", "pasa")
CSV_COLUMNS = ("check", "anchor", "max_residual", "argmax_x", "argmax_y", "argmax_z", "tolerance", "pass")
POINT_ERRORS = (FrameError, jets.JetError, DegenerateMetric, ArithmeticError, np.linalg.LinAlgError)


class EmptyGridAfterExclusions(ValueError):
    pass


class GridSpecError(ValueError):
    pass


class ReportIOError(OSError):
    pass


# grids ---------------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleGrid:
    """Sample points in a closed box.

    ``lattice`` uses ``counts`` evenly spaced values per axis (endpoints
    included).  ``random`` draws uniform points from a PCG64 generator seeded
    with ``seed`` and rejects out-of-domain points until ``count`` remain.
    """

    box: tuple = ((-1.0, 1.0), (-1.0, 1.0), (1.0, 3.0))
    mode: str = "lattice"
    counts: tuple = (5, 5, 5)
    count: int = 100
    seed: int = 0
    lam_min: float = LAMBDA_MIN

    @classmethod
    def parse(cls, spec: str, box=None, seed: int = 0, lam_min: float = LAMBDA_MIN) -> "SampleGrid":
        """Parse ``lattice:5,5,5`` or ``random:100``."""
        box = cls.box if box is None else _parse_box(box)
        m = re.fullmatch(r"\s*(lattice|random)\s*:\s*([0-9,\s]+)", spec or "")
        if not m:
            raise GridSpecError(f"grid must look like lattice:NX,NY,NZ or random:N, got {spec!r}")
        nums = [int(v) for v in m.group(2).split(",") if v.strip()]
        if m.group(1) == "lattice":
            if len(nums) != 3 or min(nums) < 1:
                raise GridSpecError(f"lattice needs three positive counts, got {spec!r}")
            return cls(box, "lattice", tuple(nums), seed=seed, lam_min=lam_min)
        if len(nums) != 1 or nums[0] < 1:
            raise GridSpecError(f"random needs one positive count, got {spec!r}")
        return cls(box, "random", count=nums[0], seed=seed, lam_min=lam_min)

    def spec(self) -> str:
        if self.mode == "lattice":
            return "lattice:" + ",".join(str(n) for n in self.counts)
        return f"random:{self.count}"

    def to_dict(self) -> dict:
        return {
            "spec": self.spec(),
            "box": [list(map(float, b)) for b in self.box],
            "seed": int(self.seed),
            "lambda_min": float(self.lam_min),
            "generator": "numpy PCG64" if self.mode == "random" else None,
        }

    def points(self, domain) -> np.ndarray:
        if self.mode == "lattice":
            axes = [np.linspace(lo, hi, n) if n > 1 else np.array([(lo + hi) / 2]) for (lo, hi), n in zip(self.box, self.counts)]
            pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
            return pts[domain.contains(pts)]
        rng = np.random.Generator(np.random.PCG64(self.seed))
        lo = np.array([b[0] for b in self.box], dtype=float)
        hi = np.array([b[1] for b in self.box], dtype=float)
        kept = []
        total = 0
        for _ in range(1000):
            batch = lo + (hi - lo) * rng.random((max(self.count, 64), 3))
            batch = batch[domain.contains(batch)]
            kept.append(batch)
            total += len(batch)
            if total >= self.count:
                break
        pts = np.concatenate(kept)[: self.count]
        return pts


def _parse_box(box) -> tuple:
    if isinstance(box, str):
        try:
            vals = [float(v) for v in box.split(",")]
        except ValueError as exc:
            raise GridSpecError(f"box must be six numbers, got {box!r}") from exc
    else:
        vals = [float(v) for v in np.asarray(box, dtype=float).ravel()]
    if len(vals) != 6 or not all(math.isfinite(v) for v in vals):
        raise GridSpecError(f"box must be six finite numbers x0,x1,y0,y1,z0,z1, got {box!r}")
    pairs = tuple((vals[2 * i], vals[2 * i + 1]) for i in range(3))
    if any(lo > hi for lo, hi in pairs):
        raise GridSpecError(f"box bounds must satisfy lo <= hi, got {box!r}")
    return pairs


def default_box(domain) -> tuple:
    """x, y in [-1, 1]; a finite z-interval is shrunk by 5% per side, otherwise [1, 3]."""
    lo, hi = domain.box[2]
    if lo is not None and hi is not None:
        pad = 0.05 * (hi - lo)
        z = (lo + pad, hi - pad)
    else:
        z = (1.0, 3.0)
    return ((-1.0, 1.0), (-1.0, 1.0), z)


# report types ---------------------------------------------------------------------------

@dataclass
class CheckEntry:
    name: str
    anchor: str
    max_residual: float
    argmax: tuple | None
    tolerance: float
    passed: bool
    evaluated: int = 0
    errors: int = 0
    worst: list = field(default_factory=list)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "max_residual": _finite_or_none(self.max_residual),
            "argmax": None if self.argmax is None else [float(v) for v in self.argmax],
            "tolerance": float(self.tolerance),
            "pass": bool(self.passed),
            "evaluated": int(self.evaluated),
            "errors": int(self.errors),
            "worst": [{"point": [float(v) for v in p], "residual": _finite_or_none(r)} for p, r in self.worst],
            "details": self.details,
        }


@dataclass
class CheckReport:
    entries: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries)

    def entry(self, name: str) -> CheckEntry:
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def names(self) -> list[str]:
        return [e.name for e in self.entries]

    def to_dict(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "metadata": self.metadata,
            "passed": self.passed,
            "entries": [e.to_dict() for e in sorted(self.entries, key=lambda e: e.name)],
        }

    def merge(self, other: "CheckReport") -> "CheckReport":
        meta = dict(self.metadata)
        meta["suites"] = list(self.metadata.get("suites", [])) + list(other.metadata.get("suites", []))
        meta["notes"] = list(self.metadata.get("notes", [])) + list(other.metadata.get("notes", []))
        meta["errors"] = int(self.metadata.get("errors", 0)) + int(other.metadata.get("errors", 0))
        for key, val in other.metadata.items():
            meta.setdefault(key, val)
        return CheckReport(self.entries + other.entries, meta)


def _finite_or_none(v):
    v = float(v)
    return v if math.isfinite(v) else None


# checks -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    anchor: str
    tier: str
    divides: bool = False  # formula divides by lambda


def _vn(v: Jet) -> np.ndarray:
    return _vmax(v.value, 1)


def _mn(m: Jet) -> np.ndarray:
    return _vmax(m.value, 2)


def _sc(f: Jet) -> np.ndarray:
    return np.abs(f.value)


AXIOM_CHECKS = [
    Check("eta_xi", "eta(xi) = 1", "first"),
    Check("phi_squared", "phi^2 = I - eta (x) xi", "first"),
    Check("phi_xi", "phi xi = 0", "first"),
    Check("eta_phi", "eta o phi = 0", "first"),
    Check("g_metric", "g(phi X, phi Y) = -g(X, Y) + eta(X) eta(Y)", "first"),
    Check("eta_dual", "g(xi, .) = eta", "first"),
    Check("contact", "d eta(X, Y) = g(X, phi Y)", "first"),
    Check("contact_volume", "eta ^ d eta != 0 (indicator)", "first"),
    Check("signature", "g has signature (2, 1) (indicator)", "first"),
    Check("eigen_balance", "phi has eigenvalues -1, 0, 1", "first"),
    Check("h_xi", "h xi = 0", "first"),
    Check("h_trace", "tr h = 0", "first"),
    Check("h_phi_trace", "tr h phi = 0", "first"),
    Check("h_anticommute", "h phi + phi h = 0", "first"),
    Check("h_symmetric", "h is g-symmetric", "first"),
    Check("nabla_xi", "nabla_X xi = -phi X + phi h X", "first"),
]


def _axioms(loc: LocalStructure, _nul) -> dict:
    out = dict(axiom_residuals(loc))
    out.update(h_residuals(loc))
    out["nabla_xi"] = nabla_xi_residual(loc)
    return out


L1_CHECKS = [
    Check("h_squared", "h^2 = (1 + kappa) phi^2", "curvature"),
    Check("xi_kappa", "xi(kappa) = 0", "curvature"),
    Check("ricci_xi", "Q xi = 2 kappa xi", "curvature"),
    Check("ricci_operator", "Q = (tau/2 - kappa) I + (-tau/2 + 3 kappa) eta (x) xi + mu h", "tau"),
    Check("nullity_fit", "R(Z, xi) xi = kappa Z + mu h Z + nu phi h Z on ker eta", "curvature", True),
    Check("nu", "nu = 0 (a (kappa, mu)-space)", "curvature", True),
]


def _l1(loc: LocalStructure, nul: Nullity) -> dict:
    nc = nul.coefficients
    h, phi, xi, eta = loc.h, loc.phi, loc.xi, loc.eta
    Q, tau = loc.ricci
    hsq = chart.matmul(h, h) - chart.matmul(phi, phi) * (nc.kappa + 1.0)
    eye = jets.stack([loc.basis(i) for i in range(3)], axis=1)
    model = eye * (tau * 0.5 - nc.kappa) + outer(xi, eta) * (tau * -0.5 + nc.kappa * 3.0) + h * nc.mu
    return {
        "h_squared": _mn(hsq),
        "xi_kappa": _sc(chart.directional(xi, nc.kappa)),
        "ricci_xi": _vn(chart.matvec(Q, xi) - xi * (nc.kappa * 2.0)),
        "ricci_operator": _mn(Q - model),
        "nullity_fit": np.asarray(nc.residual),
        "nu": _sc(nc.nu),
    }


FRAME_CHECK_NAMES = [
    ("h_frame", "h-frame relations, orthonormality and lambda^2 = |1 + kappa|", "first", False),
    ("nabla_frame_xi", "nabla_X xi and nabla_{phi X} xi", "first", False),
    ("nabla_xi_frame", "nabla_xi X = -(mu/2) phi X, nabla_xi phi X = -(mu/2) X", "curvature", True),
    ("nabla_frame_same", "nabla_X X and nabla_{phi X} phi X", "curvature", True),
    ("nabla_frame_mixed", "nabla_{phi X} X and nabla_X phi X", "curvature", True),
    ("bracket_xi_frame", "[xi, X] and [xi, phi X]", "curvature", True),
    ("bracket_X_phiX", "[X, phi X] = -B/(2 lambda) X + A/(2 lambda) phi X + 2 xi", "curvature", True),
    ("h_grad_mu", "h grad mu = grad kappa", "curvature", True),
    ("X_mu", "X(mu) in terms of A, B", "curvature", True),
    ("phiX_mu", "phi X(mu) in terms of A, B", "curvature", True),
    ("xi_A", "xi(A) in terms of lambda, mu, A, B", "curvature", True),
    ("xi_B", "xi(B) in terms of lambda, mu, A, B", "curvature", True),
    ("bracket_xi_phi_grad_lambda", "[xi, phi grad lambda] = 0", "curvature", False),
    ("grad_lambda", "grad lambda = -A X + B phi X", "curvature", False),
]

_REGIME_ANCHORS = {
    "kappa_gt": {
        "nabla_frame_xi": "nabla_X xi = (lambda - 1) phi X, nabla_{phi X} xi = -(lambda + 1) X",
        "nabla_frame_same": "nabla_X X = -B/(2 lambda) phi X, nabla_{phi X} phi X = -A/(2 lambda) X",
        "nabla_frame_mixed": "nabla_{phi X} X = -A/(2 lambda) phi X - (lambda + 1) xi, "
        "nabla_X phi X = -B/(2 lambda) X + (1 - lambda) xi",
        "bracket_xi_frame": "[xi, X] = (1 - lambda - mu/2) phi X, [xi, phi X] = (lambda + 1 - mu/2) X",
        "X_mu": "X(mu) = 2A",
        "phiX_mu": "phi X(mu) = -2B",
        "xi_A": "xi(A) = (1 - lambda - mu/2) B",
        "xi_B": "xi(B) = (lambda + 1 - mu/2) A",
        "h_frame": "h X = lambda X, h phi X = -lambda phi X, h xi = 0, lambda = sqrt(1 + kappa)",
    },
    "kappa_lt": {
        "nabla_frame_xi": "nabla_X xi = -phi X + lambda X, nabla_{phi X} xi = -X - lambda phi X",
        "nabla_frame_same": "nabla_X X = -B/(2 lambda) phi X + lambda xi, nabla_{phi X} phi X = -A/(2 lambda) X + lambda xi",
        "nabla_frame_mixed": "nabla_{phi X} X = -A/(2 lambda) phi X - xi, nabla_X phi X = -B/(2 lambda) X + xi",
        "bracket_xi_frame": "[xi, X] = -lambda X + (1 - mu/2) phi X, [xi, phi X] = (1 - mu/2) X + lambda phi X",
        "X_mu": "X(mu) = 2B",
        "phiX_mu": "phi X(mu) = -2A",
        "xi_A": "xi(A) = -lambda A + (1 - mu/2) B",
        "xi_B": "xi(B) = (1 - mu/2) A + lambda B",
        "h_frame": "h X = lambda phi X, h phi X = -lambda X, h xi = 0, lambda = sqrt(-1 - kappa)",
    },
}


def frame_checks(regime: str) -> list[Check]:
    anchors = _REGIME_ANCHORS[regime]
    return [Check(n, anchors.get(n, a), t, d) for n, a, t, d in FRAME_CHECK_NAMES]


def _frame_identities(loc: LocalStructure, nul: Nullity) -> dict:
    nc = nul.coefficients
    fr = nc.frame
    X, P, xi = fr.X, fr.phiX, loc.xi
    lam, mu, kappa, A, B = nc.lam, nc.mu, nc.kappa, nc.A, nc.B
    gt = fr.regime == "kappa_gt"

    def nab(U, V):
        return chart.covariant_derivative(loc.gamma, U, V)

    br = chart.lie_bracket
    inv2l = jets.reciprocal(lam * 2.0)
    hm = mu * 0.5
    out = {}
    fres = fr.residuals(loc)
    lam_rel = lam * lam - (kappa + 1.0) if gt else lam * lam + (kappa + 1.0)
    out["h_frame"] = np.maximum.reduce([fres[k] for k in ("h_X", "h_phiX", "h_xi", "phiX", "orthonormal")] + [_sc(lam_rel)])
    if gt:
        e1 = [nab(X, xi) - P * (lam - 1.0), nab(P, xi) + X * (lam + 1.0)]
        e3 = [nab(X, X) + P * (B * inv2l), nab(P, P) + X * (A * inv2l)]
        e4 = [
            nab(P, X) - (P * (-A * inv2l) - xi * (lam + 1.0)),
            nab(X, P) - (X * (-B * inv2l) + xi * (1.0 - lam)),
        ]
        e5 = [br(xi, X) - P * (1.0 - lam - hm), br(xi, P) - X * (lam + 1.0 - hm)]
    else:
        e1 = [nab(X, xi) - (-P + X * lam), nab(P, xi) - (-X - P * lam)]
        e3 = [nab(X, X) - (P * (-B * inv2l) + xi * lam), nab(P, P) - (X * (-A * inv2l) + xi * lam)]
        e4 = [nab(P, X) - (P * (-A * inv2l) - xi), nab(X, P) - (X * (-B * inv2l) + xi)]
        e5 = [br(xi, X) - (X * -lam + P * (1.0 - hm)), br(xi, P) - (X * (1.0 - hm) + P * lam)]
    e2 = [nab(xi, X) + P * hm, nab(xi, P) + X * hm]
    e6 = br(X, P) - (X * (-B * inv2l) + P * (A * inv2l) + xi * 2.0)
    worst = lambda vs: np.maximum.reduce([_vn(v) for v in vs])  # noqa: E731
    out["nabla_frame_xi"] = worst(e1)
    out["nabla_xi_frame"] = worst(e2)
    out["nabla_frame_same"] = worst(e3)
    out["nabla_frame_mixed"] = worst(e4)
    out["bracket_xi_frame"] = worst(e5)
    out["bracket_X_phiX"] = _vn(e6)
    inv = invariants_at(loc, nc)
    out["h_grad_mu"] = inv["eq7"]
    out["X_mu"] = inv["eq8"]
    out["phiX_mu"] = inv["eq9"]
    xiA = chart.directional(xi, A)
    xiB = chart.directional(xi, B)
    if gt:
        out["xi_A"] = _sc(xiA - B * (1.0 - lam - hm))
        out["xi_B"] = _sc(xiB - A * (lam + 1.0 - hm))
    else:
        out["xi_A"] = _sc(xiA - (A * -lam + B * (1.0 - hm)))
        out["xi_B"] = _sc(xiB - (A * (1.0 - hm) + B * lam))
    grad_lam = chart.gradient_field(loc.ginv, lam)
    out["bracket_xi_phi_grad_lambda"] = _vn(br(xi, loc.phi_of(grad_lam)))
    out["grad_lambda"] = _vn(grad_lam - (X * -A + P * B))
    return out


CURVATURE_CHECKS = [
    Check("laplacian_lambda", "Laplacian(lambda) = -X(A) + phi X(B) + (A^2 - B^2)/(2 lambda)", "curvature", True),
    Check(
        "scalar_curvature",
        "tau = Laplacian(lambda)/lambda - |grad lambda|^2/lambda^2 + 2(kappa + mu)",
        "tau",
        True,
    ),
    Check("laplacian_forms", "frame Laplacian = coordinate divergence form", "curvature"),
    Check("scalar_curvature_frame", "tau by frame trace = tau by coordinate contraction", "curvature"),
]


def _curvature(loc: LocalStructure, nul: Nullity) -> dict:
    nc = nul.coefficients
    fr = nc.frame
    lam, A, B = nc.lam, nc.A, nc.B
    frame = chart.SignedFrame((loc.xi, fr.X, fr.phiX), FRAME_SIGNS)
    lap_frame, lap_div = chart.laplacian_signed_frame(loc.g, loc.gamma, frame, lam, loc.ginv)
    formula_m = -chart.directional(fr.X, A) + chart.directional(fr.phiX, B) + (A * A - B * B) * jets.reciprocal(lam * 2.0)
    grad_lam = chart.gradient_field(loc.ginv, lam)
    grad_sq = loc.inner(grad_lam, grad_lam)
    inv_lam = jets.reciprocal(lam)
    tau_formula = lap_frame * inv_lam - grad_sq * inv_lam * inv_lam + (nc.kappa + nc.mu) * 2.0
    _, tau = loc.ricci
    _, tau_frame = chart.ricci_operator_frame(loc.g, loc.gamma, frame)
    return {
        "laplacian_lambda": _sc(lap_div - formula_m),
        "scalar_curvature": _sc(tau - tau_formula),
        "laplacian_forms": _sc(lap_frame - lap_div),
        "scalar_curvature_frame": _sc(tau_frame - tau),
    }


MAIN_CHECKS = [
    Check("xi_mu", "xi(mu) = 0 (hypothesis)", "curvature"),
    Check("mu_branch", "mu = 2(1 + sqrt(1 + kappa)) or mu = 2(1 - sqrt(1 + kappa))", "curvature", True),
    Check("branch_product", "F = (1 + lambda - mu/2)(1 - lambda - mu/2) = 0", "curvature", True),
    Check("branch_gradient", "B = 0 on the plus branch, A = 0 on the minus branch", "curvature", True),
    Check("z_dependence", "kappa and mu depend only on z", "curvature", True),
]


def _main_theorem(loc: LocalStructure, nul: Nullity) -> dict:
    nc = nul.coefficients
    res = classify_branch(nc.lam.value, nc.mu.value, lam_min=0.0)
    grad = np.where(res.branch == "plus", np.abs(nc.B.value), np.abs(nc.A.value))
    zdep = np.maximum.reduce([np.abs(f.d(i).value) for f in (nc.kappa, nc.mu) for i in (0, 1)])
    return {
        "xi_mu": _sc(chart.directional(loc.xi, nc.mu)),
        "mu_branch": np.minimum(res.plus_residual, res.minus_residual),
        "branch_product": res.F_residual,
        "branch_gradient": grad,
        "z_dependence": zdep,
        "_branch": res.branch,
    }


PASA_CHECKS = [Check("para_sasakian", "R(X, Y) xi = -(eta(Y) X - eta(X) Y)", "curvature")]


def _pasa(loc: LocalStructure, _nul) -> dict:
    return {"para_sasakian": para_sasakian_defect(loc)}


def _deformation_checks() -> list[Check]:
    return [
        Check("nu_bar", "nu of the deformed structure = 0", "nu_bar", True),
        Check("nullity_fit", "deformed curvature fits the nullity form", "curvature", True),
        Check("kappa_bar", "kappa_bar = (kappa + 1 - alpha^2)/alpha^2", "curvature"),
        Check("mu_bar", "mu_bar = (mu - 2 + 2 alpha)/alpha", "curvature", True),
    ]


# suite evaluation -------------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteDef:
    checks: Callable[[str | None], list[Check]]
    compute: Callable
    needs: str  # none | frame_gt | frame_lt | frame_any


SUITE_DEFS = {
    "axioms": SuiteDef(lambda r: AXIOM_CHECKS, _axioms, "none"),
    "L1": SuiteDef(lambda r: L1_CHECKS, _l1, "frame_any"),
    "L2": SuiteDef(lambda r: frame_checks("kappa_gt"), _frame_identities, "frame_gt"),
    "L3": SuiteDef(lambda r: frame_checks("kappa_lt"), _frame_identities, "frame_lt"),
    "curvature": SuiteDef(lambda r: CURVATURE_CHECKS, _curvature, "frame_any"),
    "main_theorem": SuiteDef(lambda r: MAIN_CHECKS, _main_theorem, "frame_gt"),
    "pasa": SuiteDef(lambda r: PASA_CHECKS, _pasa, "none"),
}


def parse_suite(name: str) -> tuple[str, float | None]:
    """``deformation(2)`` / ``deformation:2`` -> ("deformation", 2.0); others -> (name, None)."""
    m = re.fullmatch(r"\s*deformation\s*(?:\(\s*([^)]*)\s*\)|:\s*(\S+))\s*", name)
    if m:
        raw = m.group(1) if m.group(1) is not None else m.group(2)
        try:
            return "deformation", float(raw)
        except ValueError as exc:
            raise ValueError(f"deformation parameter must be a number, got {raw!r}") from exc
    name = name.strip()
    if name not in SUITE_DEFS:
        raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    return name, None


def _batched(points: np.ndarray, fn: Callable[[np.ndarray], dict]):
    """Evaluate ``fn`` on the whole batch, falling back to single points on error.

    Returns (dict of per-point arrays with NaN at failed points, error mask).
    """
    n = len(points)
    try:
        res = fn(points)
        return {k: np.broadcast_to(np.asarray(v), (n,)).copy() for k, v in res.items()}, np.zeros(n, bool)
    except POINT_ERRORS:
        pass
    merged: dict = {}
    errors = np.zeros(n, bool)
    for k in range(n):
        try:
            res = fn(points[k : k + 1])
        except POINT_ERRORS:
            errors[k] = True
            continue
        for name, v in res.items():
            if name not in merged:
                dtype = np.asarray(v).dtype
                merged[name] = np.full(n, np.nan) if dtype.kind == "f" else np.full(n, "", dtype=object)
            merged[name][k] = np.asarray(v).reshape(-1)[0]
    return merged, errors


def _frame_lambda(s: ParacontactStructure, points: np.ndarray):
    """Per-point signed h invariant c (lambda^2 up to sign) for point selection."""

    def fn(p):
        inv = h_invariants(s.at(p))
        return {"c": np.asarray(inv.c, dtype=float), "norm": np.asarray(inv.norm, dtype=float)}

    vals, err = _batched(points, fn)
    if not vals:
        return np.full(len(points), np.nan), np.full(len(points), np.nan), err
    return vals["c"], vals["norm"], err


def _select(s, points, needs, lam_min):
    """Points usable by a suite, the count excluded by lambda_min, errors and notes."""
    if needs == "none":
        return points, 0, 0, []
    c, norm, err = _frame_lambda(s, points)
    lam = np.sqrt(np.abs(c))
    ok = ~err & np.isfinite(c)
    below = ok & (lam < lam_min)
    keep = ok & ~below
    if needs == "frame_gt":
        keep &= c > 0
    elif needs == "frame_lt":
        keep &= c < 0
    notes = []
    return points[keep], int(below.sum()), int(err.sum()), notes


def _tolerance(check: Check, tolerances: dict, lam_grid_min: float) -> float:
    tol = tolerances.get(check.name, tolerances[check.tier])
    if check.divides and math.isfinite(lam_grid_min) and lam_grid_min > 0:
        tol *= max(1.0, 1.0 / lam_grid_min)
    return tol


def _entries(prefix, checks, vals, errors, points, tolerances, lam_grid_min) -> list[CheckEntry]:
    out = []
    for chk in checks:
        arr = np.asarray(vals.get(chk.name, np.full(len(points), np.nan)), dtype=float)
        tol = _tolerance(chk, tolerances, lam_grid_min)
        good = np.isfinite(arr) & ~errors
        n_err = int(errors.sum()) + int((~np.isfinite(arr) & ~errors).sum())
        if good.any():
            idx = np.flatnonzero(good)
            order = idx[np.argsort(-arr[idx], kind="stable")]
            k = order[0]
            max_res, argmax = float(arr[k]), tuple(float(v) for v in points[k])
            worst = [(tuple(points[j]), float(arr[j])) for j in order[:WORST_CAP]]
            passed = max_res <= tol
        else:
            max_res, argmax, worst, passed = math.nan, None, [], False
        out.append(
            CheckEntry(
                name=f"{prefix}.{chk.name}",
                anchor=chk.anchor,
                max_residual=max_res,
                argmax=argmax,
                tolerance=tol,
                passed=passed,
                evaluated=int(good.sum()),
                errors=n_err,
                worst=worst,
            )
        )
    return out


def run_suite(
    s: ParacontactStructure,
    suite: str,
    grid: SampleGrid,
    tolerances: dict | None = None,
) -> CheckReport:
    """Run one named suite on ``grid``; per-point failures are counted, not raised."""
    tols = dict(DEFAULT_TOLERANCES)
    tols.update(tolerances or {})
    name, alpha = parse_suite(suite)
    all_points = grid.points(s.domain)
    meta = {
        "label": s.label,
        "grid": grid.to_dict(),
        "seed": int(grid.seed),
        "version": __version__,
        "suites": [suite.strip()],
        "notes": [],
        "errors": 0,
    }
    if len(all_points) == 0:
        raise EmptyGridAfterExclusions(f"no grid points of {grid.spec()} lie in the domain of {s.label!r}")
    if name == "deformation":
        return _run_deformation(s, alpha, grid, all_points, tols, meta)
    sd = SUITE_DEFS[name]
    points, n_below, n_err, notes = _select(s, all_points, sd.needs, grid.lam_min)
    meta["notes"].extend(notes)
    if n_below:
        meta["notes"].append(f"{suite}: {n_below} point(s) with lambda < {grid.lam_min:g} excluded")
    if len(points) == 0:
        if sd.needs in ("frame_gt", "frame_lt") and n_err == 0:
            want = "kappa > -1" if sd.needs == "frame_gt" else "kappa < -1"
            meta["notes"].append(f"{suite}: skipped, no grid point with {want}")
            return CheckReport([], meta)
        raise EmptyGridAfterExclusions(f"suite {suite}: no usable grid points for {s.label!r}")

    def fn(p):
        loc = s.at(p)
        nul = Nullity(loc) if sd.needs != "none" else None
        return sd.compute(loc, nul)

    vals, errors = _batched(points, fn)
    lam_grid_min = _grid_lambda_min(s, points, sd.needs)
    regime = {"frame_gt": "kappa_gt", "frame_lt": "kappa_lt"}.get(sd.needs)
    entries = _entries(name, sd.checks(regime), vals, errors, points, tols, lam_grid_min)
    if "_branch" in vals:
        branches = vals["_branch"][~errors]
        counts = {b: int(np.sum(branches == b)) for b in ("plus", "minus")}
        for e in entries:
            e.details = {"branches": counts}
    meta["errors"] = int(errors.sum()) + n_err
    return CheckReport(entries, meta)


def _grid_lambda_min(s, points, needs) -> float:
    if needs == "none":
        return math.nan
    c, _, err = _frame_lambda(s, points)
    lam = np.sqrt(np.abs(c[~err]))
    return float(lam.min()) if lam.size else math.nan


def _run_deformation(s, alpha, grid, points, tols, meta) -> CheckReport:
    prefix = f"deformation({alpha:g})"
    d = d_homothetic_deform(s, alpha)
    vals, errors = _batched(points, lambda p: _axioms(d.at(p), None))
    entries = _entries(f"{prefix}.axioms", AXIOM_CHECKS, vals, errors, points, tols, math.nan)
    meta["errors"] = int(errors.sum())
    fpts, n_below, n_err, _ = _select(d, points, "frame_any", grid.lam_min)
    if n_below:
        meta["notes"].append(f"{prefix}: {n_below} point(s) with lambda < {grid.lam_min:g} excluded")
    if len(fpts):

        def fn(p):
            nd = Nullity(d.at(p)).coefficients
            nb = Nullity(s.at(p)).coefficients
            k_pred = (nb.kappa.value + 1.0 - alpha**2) / alpha**2
            m_pred = (nb.mu.value - 2.0 + 2.0 * alpha) / alpha
            return {
                "nu_bar": np.abs(nd.nu.value),
                "nullity_fit": np.asarray(nd.residual),
                "kappa_bar": np.abs(nd.kappa.value - k_pred),
                "mu_bar": np.abs(nd.mu.value - m_pred),
            }

        nvals, nerr = _batched(fpts, fn)
        lam_min = _grid_lambda_min(d, fpts, "frame_any")
        entries += _entries(prefix, _deformation_checks(), nvals, nerr, fpts, tols, lam_min)
        meta["errors"] += int(nerr.sum()) + n_err
    else:
        meta["notes"].append(f"{prefix}: nullity checks skipped, no point admits an h-frame")
    return CheckReport(entries, meta)


def run_suites(s: ParacontactStructure, suites, grid: SampleGrid, tolerances: dict | None = None) -> CheckReport:
    """Run several suites and merge them into one report."""
    report = CheckReport([], {})
    first = True
    for suite in suites:
        r = run_suite(s, suite, grid, tolerances)
        report = r if first else report.merge(r)
        first = False
    if first:
        report.metadata = {
            "label": s.label,
            "grid": grid.to_dict(),
            "seed": int(grid.seed),
            "version": __version__,
            "suites": [],
            "notes": [],
            "errors": 0,
        }
    return report


# emission ------------------------------------------------------------------------------

def report_json(report: CheckReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n"


def report_csv(report: CheckReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for e in sorted(report.entries, key=lambda e: e.name):
        arg = e.argmax if e.argmax is not None else ("", "", "")
        w.writerow(
            [e.name, e.anchor, repr(float(e.max_residual)), *[repr(float(v)) if v != "" else "" for v in arg], repr(float(e.tolerance)), str(e.passed).lower()]
        )
    return buf.getvalue()


def report_text(report: CheckReport) -> str:
    meta = report.metadata
    lines = [
        f"structure: {meta.get('label', '?')}",
        f"grid: {meta.get('grid', {}).get('spec', '?')}  seed: {meta.get('seed', '?')}  version: {meta.get('version', '?')}",
    ]
    width = max([len(e.name) for e in report.entries] + [5])
    lines.append(f"{'check'.ljust(width)}  {'max residual':>12}  {'tolerance':>9}  result")
    for e in sorted(report.entries, key=lambda e: e.name):
        res = "FAIL" if not e.passed else "ok"
        extra = f"  ({e.errors} errors)" if e.errors else ""
        lines.append(f"{e.name.ljust(width)}  {e.max_residual:12.3e}  {e.tolerance:9.1e}  {res}{extra}")
    for note in meta.get("notes", []):
        lines.append(f"note: {note}")
    lines.append(f"overall: {'PASS' if report.passed else 'FAIL'} ({len(report.entries)} entries)")
    return "\n".join(lines) + "\n"


FORMATTERS = {"json": report_json, "csv": report_csv, "text": report_text}


def emit_report(report: CheckReport, fmt: str = "json", sink: str = "-") -> None:
    """Write ``report`` as json, csv or text to a path, or to stdout for ``-``."""
    if fmt not in FORMATTERS:
        raise ValueError(f"unknown report format {fmt!r}")
    text = FORMATTERS[fmt](report)
    if sink == "-":
        sys.stdout.write(text)
        return
    try:
        with open(sink, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportIOError(f"cannot write report to {sink!r}: {exc}") from exc
