"""Generators and jet-free numerical oracles shared by the tests."""

import numpy as np

from parakmu import jets
from parakmu.jets import Jet

EX1_BOX = ((-1.0, 1.0), (-1.0, 1.0), (1.0, 3.0))


def random_points(rng, n, box=EX1_BOX):
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    return lo + (hi - lo) * rng.random((n, 3))


def random_family_specs(rng):
    """(r, f, s) expression strings with 0.5 <= r <= 3 for every real z."""
    c = rng.uniform(-1.0, 1.0, 9)
    r = f"1.75 + {0.6 * c[0]:.4f}*sin({1.5 * c[1]:.4f}*z + {c[2]:.4f}) + {0.3 * c[3]:.4f}*cos(z)"
    f = f"{c[4]:.4f}*z^2 + {c[5]:.4f}*exp({0.5 * c[6]:.4f}*z)"
    s = f"{c[7]:.4f}*z + {0.5 * c[8]:.4f}*ln(2 + z^2)"
    return r, f, s


def random_composite(rng, depth=3, variables=("x", "y", "z")):
    """A random smooth expression in the grammar, bounded on [-2, 2]^3."""
    if depth == 0 or rng.random() < 0.2:
        if rng.random() < 0.3:
            return f"{rng.uniform(0.2, 2.0):.3f}"
        return str(rng.choice(variables))
    a = random_composite(rng, depth - 1, variables)
    b = random_composite(rng, depth - 1, variables)
    k = int(rng.integers(0, 9))
    return [
        f"({a} + {b})",
        f"({a} - {b})",
        f"({a} * {b})",
        f"({a} / (2 + ({b})^2))",
        f"sin({a})",
        f"cos({a})",
        f"exp(0.3*sin({a}))",
        f"sqrt(1 + ({a})^2)",
        f"ln(2 + ({a})^2)",
    ][k]


# polynomial fields -----------------------------------------------------------------

MONOMIALS = [(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1), (2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1)]


def polynomial(coeffs, x, y, z) -> Jet:
    out = x * 0.0 + float(coeffs[0])
    for c, (i, j, k) in zip(coeffs[1:], MONOMIALS[1:]):
        term = x * 0.0 + float(c)
        for var, n in ((x, i), (y, j), (z, k)):
            for _ in range(n):
                term = term * var
        out = out + term
    return out


def polynomial_instance(rng, scale=0.05):
    """Random metric near diag(1, 1, -1) and three vector fields, all quadratic polynomials."""
    base = np.diag([1.0, 1.0, -1.0])
    gc = rng.uniform(-1, 1, (3, 3, len(MONOMIALS))) * scale
    gc = 0.5 * (gc + gc.transpose(1, 0, 2))
    vc = rng.uniform(-1, 1, (3, 3, len(MONOMIALS)))

    def metric(x, y, z):
        return jets.stack([jets.stack([polynomial(gc[i, j], x, y, z) + base[i, j] for j in range(3)]) for i in range(3)])

    def field(n):
        return lambda x, y, z: jets.stack([polynomial(vc[n, i], x, y, z) for i in range(3)])

    return metric, [field(n) for n in range(3)]


# jet-free curvature oracle -----------------------------------------------------------

def _d(fn, p, axis, h):
    e = np.zeros(3)
    e[axis] = h
    return (-fn(p + 2 * e) + 8 * fn(p + e) - 8 * fn(p - e) + fn(p - 2 * e)) / (12 * h)


def fd_christoffel(metric, p, h=1e-3):
    """Gamma[k, i, j] from fourth-order central differences of a numpy metric."""
    ginv = np.linalg.inv(metric(p))
    dg = np.stack([_d(metric, p, l, h) for l in range(3)])  # dg[l, i, j]
    low = 0.5 * (np.einsum("ijl->lij", dg) + np.einsum("jil->lij", dg) - dg)
    return np.einsum("kl,lij->kij", ginv, low)


def fd_scalar_curvature(metric, p, h=1e-3):
    """tau = g^ij Ric_ij with Ric_ij = R^k_ikj, everything from nested finite differences."""
    p = np.asarray(p, dtype=float)
    G = fd_christoffel(metric, p, h)
    dG = np.stack([_d(lambda q: fd_christoffel(metric, q, h), p, m, 10 * h) for m in range(3)])  # dG[m, k, i, j]
    # R^k_lij = d_i G^k_jl - d_j G^k_il + G^k_im G^m_jl - G^k_jm G^m_il
    R = (
        np.einsum("ikjl->klij", dG)
        - np.einsum("jkil->klij", dG)
        + np.einsum("kim,mjl->klij", G, G)
        - np.einsum("kjm,mil->klij", G, G)
    )
    ric = np.einsum("klkj->lj", R)
    return float(np.einsum("lj,lj->", np.linalg.inv(metric(p)), ric))


def ex1_metric(p):
    """The ex1 metric written directly in numpy: r = z, f = 1, s = 2."""
    x, y, z = p
    a = -2 * y + 1.0
    b = -0.5 * y / z - 2 * x * z + 2.0
    return np.array([[1.0, 0.0, -a], [0.0, 1.0, -b], [-a, -b, a * a + b * b - 1.0]])
