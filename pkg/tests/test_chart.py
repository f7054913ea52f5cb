import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import ex1_metric, fd_scalar_curvature, polynomial_instance
from parakmu import chart, jets
from parakmu.chart import DegenerateMetric


def _setup(rng, p):
    metric, fields = polynomial_instance(rng)
    coords = jets.seed(p)
    g = metric(*coords)
    gamma = chart.christoffel(g)
    X, Y, Z = (f(*coords) for f in fields)
    return g, gamma, X, Y, Z


@pytest.fixture
def rng():
    return np.random.default_rng(7)


class TestLeviCivita:
    def test_torsion_free(self, rng):
        _, gamma, X, Y, _ = _setup(rng, [0.2, -0.4, 0.5])
        T = chart.covariant_derivative(gamma, X, Y) - chart.covariant_derivative(gamma, Y, X) - chart.lie_bracket(X, Y)
        assert_allclose(T.value, 0.0, atol=1e-12)

    def test_metric_compatible(self, rng):
        g, gamma, X, Y, Z = _setup(rng, [0.2, -0.4, 0.5])
        lhs = chart.directional(X, chart.inner(g, Y, Z))
        rhs = chart.inner(g, chart.covariant_derivative(gamma, X, Y), Z) + chart.inner(g, Y, chart.covariant_derivative(gamma, X, Z))
        assert_allclose(lhs.value, rhs.value, atol=1e-12)

    def test_first_bianchi(self, rng):
        _, gamma, X, Y, Z = _setup(rng, [0.2, -0.4, 0.5])
        R = chart.riemann_apply
        cyc = R(gamma, X, Y, Z) + R(gamma, Y, Z, X) + R(gamma, Z, X, Y)
        assert_allclose(cyc.value, 0.0, atol=1e-10)

    def test_riemann_tensor_matches_nested_derivatives(self, rng):
        _, gamma, X, Y, Z = _setup(rng, [0.1, 0.3, -0.2])
        Rm = chart.riemann_tensor(gamma).value
        direct = chart.riemann_apply(gamma, X, Y, Z).value
        contracted = np.einsum("lkij,i,j,k->l", Rm, X.value, Y.value, Z.value)
        assert_allclose(direct, contracted, atol=1e-10)

    def test_flat_metric_has_no_curvature(self):
        coords = jets.seed([0.3, 0.1, 2.0])
        x, y, z = coords
        one = x * 0.0 + 1.0
        zero = x * 0.0
        # polar-like coordinates on flat space: dx^2 + x^2 dy^2 - dz^2
        g = jets.stack([jets.stack([one, zero, zero]), jets.stack([zero, x * x, zero]), jets.stack([zero, zero, -one])])
        Q, tau = chart.ricci_and_scalar(g)
        assert_allclose(chart.riemann_tensor(chart.christoffel(g)).value, 0.0, atol=1e-12)
        assert_allclose(tau.value, 0.0, atol=1e-12)


class TestScalarCurvature:
    def test_ex1_probe_matches_independent_oracle(self, ex1):
        p = np.array([1.0, 1.0, 2.0])
        _, tau = ex1.at(p).ricci
        assert_allclose(fd_scalar_curvature(ex1_metric, p), 18.375, atol=1e-6)
        assert_allclose(tau.value, 18.375, atol=1e-9)

    def test_frame_and_coordinate_traces_agree(self, ex1):
        from parakmu.nullity import FRAME_SIGNS, build_h_frame

        p = np.array([0.4, -0.3, 1.7])
        loc = ex1.at(p)
        fr = build_h_frame(ex1, p)
        frame = chart.SignedFrame((loc.xi, fr.X, fr.phiX), FRAME_SIGNS)
        assert frame.gram_residual(loc.g) < 1e-12
        Q, tau = loc.ricci
        Qf, tauf = chart.ricci_operator_frame(loc.g, loc.gamma, frame)
        assert_allclose(Qf.value, Q.value, atol=1e-9)
        assert_allclose(tauf.value, tau.value, atol=1e-9)
        lap_frame, lap_div = chart.laplacian_signed_frame(loc.g, loc.gamma, frame, fr.lam)
        assert_allclose(lap_frame.value, lap_div.value, atol=1e-10)


class TestSignatureAndInverse:
    def test_signature(self):
        assert chart.signature(np.diag([1.0, 1.0, -1.0])) == (2, 1)
        g = jets.Jet.constant(np.diag([1.0, -1.0, -1.0]))
        assert not chart.check_signature(g)

    def test_degenerate_metric(self):
        g = jets.Jet.constant(np.diag([1.0, 0.0, -1.0]))
        with pytest.raises(DegenerateMetric):
            chart.metric_inverse(g)

    def test_inverse(self):
        x, y, z = jets.seed([0.5, 0.2, 1.0])
        M = jets.stack([jets.stack([x + 2.0, y, z]), jets.stack([y, -1.0 + x * 0.0, x]), jets.stack([z, x, 3.0 + y])])
        prod = chart.matmul(M, chart.matrix_inverse(M))
        assert_allclose(prod.c, np.eye(3)[None] * (np.arange(prod.c.shape[0]) == 0)[:, None, None], atol=1e-12)
