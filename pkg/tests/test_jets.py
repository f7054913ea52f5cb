import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from parakmu import jets
from parakmu.expr import parse_coordinate_expression
from parakmu.jets import BudgetExhausted, DivisionNearZero, DomainError, Jet


def _hessian(u: Jet) -> np.ndarray:
    H = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            m = [0, 0, 0]
            m[i] += 1
            m[j] += 1
            H[i, j] = u.derivative(m)
    return H


class TestArithmetic:
    def test_polynomial_partials(self):
        x, y, z = jets.seed([1.0, 2.0, -1.0])
        u = x * x * y + z**3 - 2.0 * x * z
        assert_allclose(u.value, 2.0 - 1.0 + 2.0)
        assert_allclose(u.gradient, [2 * 1 * 2 + 2.0, 1.0, 3.0 - 2.0])
        assert_allclose(u.derivative((2, 1, 0)), 2.0)
        assert_allclose(u.derivative((0, 0, 3)), 6.0)

    def test_reflected_operators(self):
        x, _, _ = jets.seed([2.0, 0.0, 0.0])
        assert_allclose((1.0 - x).value, -1.0)
        assert_allclose((3.0 * x).gradient, [3.0, 0.0, 0.0])
        assert_allclose((1.0 / x).derivative((2, 0, 0)), 2.0 / 8.0)

    def test_batch_matches_single_points(self):
        pts = np.array([[0.1, 0.2, 0.3], [1.0, -1.0, 2.0]])
        f = lambda x, y, z: jets.sin(x * y) + jets.exp(z) / (2.0 + x * x)  # noqa: E731
        batch = f(*jets.seed(pts))
        for k, p in enumerate(pts):
            single = f(*jets.seed(p))
            assert_allclose(batch.c[:, k], single.c, rtol=1e-14)

    def test_d_lowers_budget(self):
        x, y, z = jets.seed([0.5, 0.5, 0.5])
        u = jets.exp(x + y * z)
        assert u.order == 3
        v = u.d(0).d(1)
        assert v.order == 1
        assert_allclose(v.value, 0.5 * math.exp(0.75))
        with pytest.raises(BudgetExhausted):
            u.d(0).d(0).d(0).d(0)
        with pytest.raises(BudgetExhausted):
            u.d(2).derivative((1, 1, 1))


class TestElementary:
    @pytest.mark.parametrize(
        "fn, ref, d1",
        [
            (jets.exp, math.exp, math.exp),
            (jets.log, math.log, lambda t: 1 / t),
            (jets.sin, math.sin, math.cos),
            (jets.cos, math.cos, lambda t: -math.sin(t)),
            (jets.sqrt, math.sqrt, lambda t: 0.5 / math.sqrt(t)),
        ],
    )
    def test_univariate(self, fn, ref, d1):
        t = 1.3
        _, _, z = jets.seed([0.0, 0.0, t])
        u = fn(z)
        assert_allclose(u.value, ref(t))
        assert_allclose(u.derivative((0, 0, 1)), d1(t), rtol=1e-14)

    def test_domain_errors(self):
        _, _, z = jets.seed([0.0, 0.0, -1.0])
        with pytest.raises(DomainError):
            jets.log(z)
        with pytest.raises(DomainError):
            jets.sqrt(z)
        with pytest.raises(DivisionNearZero):
            jets.reciprocal(z + 1.0)


class TestFiniteDifferenceOracle:
    @pytest.mark.parametrize(
        "src",
        ["sin(x*y) + z^3", "exp(0.3*x)*cos(y - z)", "sqrt(1 + x^2 + y^2)/(2 + z^2)", "ln(2 + x^2) * sin(z)"],
    )
    def test_expressions(self, src):
        e = parse_coordinate_expression(src)
        p = np.array([0.3, -0.7, 1.1])
        u = e(*jets.seed(p))
        grad, hess = jets.finite_difference_oracle(lambda q: e(*jets.seed(q)).value, p)
        assert_allclose(u.gradient, grad, atol=1e-8)
        assert_allclose(_hessian(u), hess, atol=1e-6)
