"""Constructors for explicit paracontact structures and their JSON manifests.

Two families are parameterized by scalar functions r, f, s of z.  With
``a`` and ``b`` as below and ``lambda = r(z)``:

case1 (mu = 2(1 + lambda))::

    a = -2y + f(z),  b = -(y/2) r'/r - 2x r + s
    g = [[1, 0, -a], [0, 1, -b], [-a, -b, -1 + a^2 + b^2]]

case2 (mu = 2(1 - lambda))::

    a = 2y + f(z),   b = -(y/2) r'/r + 2x r + s
    g = [[1, 0, -a], [0, -1, b], [-a, b, 1 + a^2 - b^2]]

Both use xi = d/dx, eta = dx - a dz and
phi = [[0, a, -ab], [0, b, 1 - b^2], [0, 1, -b]].
"""

from __future__ import annotations

import json
import math
from dataclasses import replace
from typing import Sequence

import numpy as np

from . import chart, jets
from .expr import FunctionSpec, ParseError, parse_coordinate_expression, parse_scalar_function
from .jets import Jet
from .structure import (
    Domain,
    ParacontactStructure,
    Tensors,
    axiom_residuals,
    d_homothetic_deform,
)

MANIFEST_VERSION = 1
DOMAIN_SAMPLES = 256
R_FLOOR = 1e-8
VALIDATION_TOL = 1e-8
CASES = ("example", "case1", "case2", "custom", "synthetic")


class DomainViolation(ValueError):
    pass


class ValidationFailure(ValueError):
    def __init__(self, message: str, worst: dict | None = None):
        super().__init__(message)
        self.worst = worst or {}


class ManifestError(ValueError):
    pass


def _ones(x: Jet) -> Jet:
    return Jet.constant(np.ones(x.shape))


def _matrix(rows) -> Jet:
    return jets.stack([jets.stack(row) for row in rows])


def family_tensors(case: str, r: FunctionSpec, f: FunctionSpec, s: FunctionSpec):
    """Tensor-field callable for ``case`` in {case1, case2}."""
    if case not in ("case1", "case2"):
        raise ValueError(f"unknown family case {case!r}")
    dr = r.derivative()
    sign = 1.0 if case == "case1" else -1.0

    def tensors(x: Jet, y: Jet, z: Jet) -> Tensors:
        one = _ones(x)
        zero = one * 0.0
        rz = r(z) * one
        a = y * (-2.0 * sign) + f(z)
        b = -0.5 * y * dr(z) / rz - x * rz * (2.0 * sign) + s(z)
        if case == "case1":
            g = _matrix([[one, zero, -a], [zero, one, -b], [-a, -b, a * a + b * b - 1.0]])
        else:
            g = _matrix([[one, zero, -a], [zero, -one, b], [-a, b, a * a - b * b + 1.0]])
        phi = _matrix([[zero, a, -a * b], [zero, b, 1.0 - b * b], [zero, one, -b]])
        xi = jets.stack([one, zero, zero])
        eta = jets.stack([one, zero, -a])
        return Tensors(phi, xi, eta, g)

    return tensors


def family_h(case: str, r: FunctionSpec, f: FunctionSpec, s: FunctionSpec, point) -> np.ndarray:
    """Closed-form h matrix of a family at one point (for cross-checks)."""
    x, y, z = (float(v) for v in point)
    zj = Jet.constant(z)
    lam = float(r(zj).value)
    dlam = float(r.derivative()(zj).value)
    fz, sz = float(f(zj).value), float(s(zj).value)
    if case == "case1":
        a = -2 * y + fz
        b = -0.5 * y * dlam / lam - 2 * x * lam + sz
        return np.array([[0, 0, a * lam], [0, -lam, 2 * lam * b], [0, 0, lam]])
    a = 2 * y + fz
    b = -0.5 * y * dlam / lam + 2 * x * lam + sz
    return np.array([[0, 0, -a * lam], [0, lam, -2 * lam * b], [0, 0, -lam]])


def _interval_domain(domain: Sequence[float]) -> Domain:
    lo, hi = (float(v) for v in domain)
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise DomainViolation(f"z-interval must be finite with lo < hi, got ({lo}, {hi})")
    return Domain(box=((None, None), (None, None), (lo, hi)))


def check_r_positive(r: FunctionSpec, lo: float, hi: float, samples: int = DOMAIN_SAMPLES) -> None:
    """Reject ``r`` when any of ``samples`` interior points gives r <= R_FLOOR.

    A dense sample, not a proof of positivity.
    """
    zs = np.linspace(lo, hi, samples + 2)[1:-1]
    try:
        vals = r(Jet.constant(zs)).value
    except jets.JetError as exc:
        raise DomainViolation(f"r({r.source!r}) cannot be evaluated on ({lo}, {hi}): {exc}") from exc
    vals = np.broadcast_to(vals, zs.shape)
    bad = ~(vals > R_FLOOR)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DomainViolation(f"r({r.source!r}) = {vals[k]:.6g} at z = {zs[k]:.6g}; r must stay positive")


def validation_points(domain: Domain) -> np.ndarray:
    """Small deterministic lattice inside ``domain`` used to validate constructors."""
    axes = []
    for lo, hi in domain.box:
        lo_ = -1.0 if lo is None else lo
        hi_ = 1.0 if hi is None else hi
        if lo is None and hi is not None:
            lo_ = hi_ - 2.0
        if hi is None and lo is not None:
            hi_ = lo_ + 2.0
        axes.append(np.linspace(lo_, hi_, 5)[1:-1])
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
    return pts[domain.contains(pts)]


def validate(s: ParacontactStructure, points=None, tol: float = VALIDATION_TOL) -> None:
    """Raise :class:`ValidationFailure` if any axiom residual exceeds ``tol``."""
    pts = validation_points(s.domain) if points is None else np.atleast_2d(points)
    if len(pts) == 0:
        raise ValidationFailure(f"no validation points inside the domain of {s.label!r}")
    try:
        res = axiom_residuals(s.at(pts))
    except jets.JetError as exc:
        raise DomainViolation(f"{s.label!r} cannot be evaluated on its validation sample: {exc}") from exc
    worst_name, worst_val, worst_at = None, -1.0, None
    for name, vals in res.items():
        vals = np.nan_to_num(vals, nan=np.inf)
        k = int(np.argmax(vals))
        if vals[k] > worst_val:
            worst_name, worst_val, worst_at = name, float(vals[k]), pts[k]
    if worst_val > tol:
        worst = {"check": worst_name, "residual": worst_val, "point": [float(v) for v in worst_at]}
        raise ValidationFailure(
            f"{s.label!r} fails {worst_name}: residual {worst_val:.3e} > {tol:g} at {tuple(worst['point'])}",
            worst,
        )


def _as_spec(v) -> FunctionSpec:
    return v if isinstance(v, FunctionSpec) else parse_scalar_function(str(v))


def build_family(case: str, r, f, s, domain: Sequence[float], label: str | None = None) -> ParacontactStructure:
    """Validated structure of ``case`` for the z-interval ``domain`` = (lo, hi)."""
    r, f, s = _as_spec(r), _as_spec(f), _as_spec(s)
    dom = _interval_domain(domain)
    lo, hi = dom.box[2]
    check_r_positive(r, lo, hi)
    manifest = {
        "version": MANIFEST_VERSION,
        "case": case,
        "r": r.source,
        "f": f.source,
        "s": s.source,
        "domain": dom.to_dict(),
        "deformations": [],
    }
    st = ParacontactStructure(
        label=label or f"{case}(r={r.source}, f={f.source}, s={s.source})",
        tensors=family_tensors(case, r, f, s),
        domain=dom,
        manifest=manifest,
        reference_lambda=lambda x, y, z, _r=r: _r(z) * _ones(x),
    )
    validate(st)
    return st


def example_preset() -> ParacontactStructure:
    """The case1 structure with r = z, f = 1, s = 2 on z != 0."""
    r, f, s = (parse_scalar_function(e) for e in ("z", "1", "2"))
    dom = Domain(excluded=("z=0",))
    st = ParacontactStructure(
        label="ex1",
        tensors=family_tensors("case1", r, f, s),
        domain=dom,
        manifest={"version": MANIFEST_VERSION, "case": "example", "preset": "ex1", "deformations": []},
        reference_lambda=lambda x, y, z: z * _ones(x),
    )
    validate(st, validation_points(Domain(box=((None, None), (None, None), (0.5, 3.5)))))
    return st


PRESETS = {"ex1": example_preset}


# synthetic h3-type structure -------------------------------------------------------

def synthetic_h3_tensors(lam: float):
    """Left-invariant structure on SL(2, R) in Gauss coordinates.

    With e, h, f the standard sl(2) basis realized by the left-invariant
    fields e = (e^{2y}, -z, -z^2), h = (0, 1, 2z), f = (0, 0, 1), the frame
    xi = -(lam/2) h, X = e, phi X = -lam f satisfies
    [xi, X] = -lam X, [xi, phi X] = lam phi X, [X, phi X] = 2 xi,
    so h X = lam phi X, h phi X = -lam X with mu = 2, kappa = -1 - lam^2.
    """

    def tensors(x: Jet, y: Jet, z: Jet) -> Tensors:
        one = _ones(x)
        zero = one * 0.0
        xi = jets.stack([zero, one * (-lam / 2), z * (-lam)])
        X = jets.stack([jets.exp(y * 2.0), -z, -(z * z)])
        P = jets.stack([zero, zero, one * (-lam)])
        F = jets.stack([xi, X, P], axis=1)  # columns
        Finv = chart.matrix_inverse(F)
        sig = Jet.constant(np.broadcast_to(np.diag([1.0, -1.0, 1.0]).reshape((3, 3) + (1,) * len(x.shape)), (3, 3) + x.shape))
        swap = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0]])
        S = Jet.constant(np.broadcast_to(swap.reshape((3, 3) + (1,) * len(x.shape)), (3, 3) + x.shape))
        FinvT = jets.Jet(np.swapaxes(Finv.c, 1, 2), Finv.order)
        g = chart.matmul(FinvT, chart.matmul(sig, Finv))
        phi = chart.matmul(F, chart.matmul(S, Finv))
        eta = Finv[0]
        return Tensors(phi, xi, eta, g)

    return tensors


def synthetic_h3(lam: float = 1.5) -> ParacontactStructure:
    """Synthetic structure of h3 type (kappa = -1 - lam^2 < -1) for exercising the kappa < -1 formulas."""
    lam = float(lam)
    if not lam > 0:
        raise DomainViolation(f"synthetic lambda must be positive, got {lam}")
    st = ParacontactStructure(
        label=f"synthetic-h3(lambda={lam:g})",
        tensors=synthetic_h3_tensors(lam),
        domain=Domain(),
        manifest={"version": MANIFEST_VERSION, "case": "synthetic", "lambda": lam, "deformations": []},
        reference_lambda=lambda x, y, z: _ones(x) * lam,
    )
    validate(st)
    return st


# custom structures ------------------------------------------------------------------

def custom_structure(components: dict, domain: Domain | None = None, label: str = "custom") -> ParacontactStructure:
    """Structure from explicit component expressions in x, y, z.

    ``components`` maps phi and g to 3x3 nested lists and xi and eta to
    length-3 lists of expression strings.
    """
    shapes = {"phi": (3, 3), "g": (3, 3), "xi": (3,), "eta": (3,)}
    parsed = {}
    for key, shape in shapes.items():
        if key not in components:
            raise ManifestError(f"custom structure is missing component {key!r}")
        arr = np.asarray(components[key], dtype=object)
        if arr.shape != shape:
            raise ManifestError(f"component {key!r} must have shape {shape}, got {arr.shape}")
        parsed[key] = np.vectorize(lambda e: parse_coordinate_expression(str(e)), otypes=[object])(arr)

    def tensors(x: Jet, y: Jet, z: Jet) -> Tensors:
        one = _ones(x)

        def ev(arr):
            if arr.ndim == 1:
                return jets.stack([e(x, y, z) * one for e in arr])
            return _matrix([[e(x, y, z) * one for e in row] for row in arr])

        return Tensors(ev(parsed["phi"]), ev(parsed["xi"]), ev(parsed["eta"]), ev(parsed["g"]))

    dom = domain or Domain()
    manifest = {
        "version": MANIFEST_VERSION,
        "case": "custom",
        "components": {k: np.asarray(components[k], dtype=object).tolist() for k in shapes},
        "domain": dom.to_dict(),
        "deformations": [],
    }
    st = ParacontactStructure(label=label, tensors=tensors, domain=dom, manifest=manifest)
    validate(st)
    return st


# manifests ---------------------------------------------------------------------------

def to_manifest(s: ParacontactStructure) -> dict:
    if not s.manifest:
        raise ManifestError(f"structure {s.label!r} carries no manifest")
    return dict(s.manifest, label=s.label)


def dumps_manifest(s: ParacontactStructure) -> str:
    return json.dumps(to_manifest(s), sort_keys=True, indent=2) + "\n"


def from_manifest(d: dict) -> ParacontactStructure:
    """Rebuild (and revalidate) a structure from a manifest dictionary."""
    if not isinstance(d, dict):
        raise ManifestError("manifest must be a JSON object")
    if d.get("version") != MANIFEST_VERSION:
        raise ManifestError(f"unsupported manifest version {d.get('version')!r}")
    case = d.get("case")
    try:
        if case == "example":
            preset = d.get("preset", "ex1")
            if preset not in PRESETS:
                raise ManifestError(f"unknown preset {preset!r}")
            st = PRESETS[preset]()
        elif case in ("case1", "case2"):
            box = Domain.from_dict(d["domain"]).box[2]
            st = build_family(case, d["r"], d["f"], d["s"], box)
        elif case == "synthetic":
            st = synthetic_h3(d.get("lambda", 1.5))
        elif case == "custom":
            dom = Domain.from_dict(d["domain"]) if "domain" in d else None
            st = custom_structure(d["components"], dom)
        else:
            raise ManifestError(f"unknown manifest case {case!r}; expected one of {', '.join(CASES)}")
    except KeyError as exc:
        raise ManifestError(f"manifest for case {case!r} is missing key {exc.args[0]!r}") from exc
    for alpha in d.get("deformations", []):
        st = d_homothetic_deform(st, alpha)
    if "label" in d:
        st = replace(st, label=d["label"])
    return st


def loads_manifest(text: str) -> ParacontactStructure:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    return from_manifest(d)


def read_manifest(path: str) -> ParacontactStructure:
    with open(path, encoding="utf-8") as fh:
        return loads_manifest(fh.read())


def write_manifest(s: ParacontactStructure, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_manifest(s))


__all__ = [
    "DomainViolation",
    "ValidationFailure",
    "ManifestError",
    "ParseError",
    "build_family",
    "example_preset",
    "synthetic_h3",
    "custom_structure",
    "family_tensors",
    "family_h",
    "to_manifest",
    "dumps_manifest",
    "from_manifest",
    "loads_manifest",
    "read_manifest",
    "write_manifest",
]
