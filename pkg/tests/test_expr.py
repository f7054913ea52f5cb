import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from helpers import random_composite
from parakmu import jets
from parakmu.expr import ParseError, parse_coordinate_expression, parse_scalar_function
from parakmu.jets import Jet


def _at(spec, z):
    u = spec(jets.seed([0.0, 0.0, z])[2])
    return float(u.value), float(u.derivative((0, 0, 1))), float(u.derivative((0, 0, 2)))


class TestEvaluation:
    def test_identity(self):
        assert_allclose(_at(parse_scalar_function("z"), 2.5)[:2], (2.5, 1.0))

    def test_polynomial(self):
        v, d1, d2 = _at(parse_scalar_function("z^2 - 1"), 3.0)
        assert_allclose((v, d1, d2), (8.0, 6.0, 2.0))

    def test_quotient_with_sqrt(self):
        spec = parse_scalar_function("sqrt(1+z^2)/z")
        v, d1, _ = _at(spec, 2.0)
        assert_allclose(v, math.sqrt(5) / 2)
        fd = (_at(spec, 2.0 + 1e-6)[0] - _at(spec, 2.0 - 1e-6)[0]) / 2e-6
        assert_allclose(d1, fd, rtol=1e-8)
        assert_allclose(d1, -1.0 / (4.0 * math.sqrt(5.0)), rtol=1e-13)

    @pytest.mark.parametrize(
        "src, z, want",
        [
            ("-z^2", 3.0, -9.0),
            ("(2^3)^2", 0.0, 64.0),
            ("-2^2", 0.0, -4.0),
            ("z^-1", 4.0, 0.25),
            ("1 - 2 - 3", 0.0, -4.0),
            ("8 / 4 / 2", 0.0, 1.0),
            ("2 + 3 * 4", 0.0, 14.0),
            ("ln(exp(z))", 1.7, 1.7),
            ("sin(z)^2 + cos(z)^2", 0.9, 1.0),
            ("1e-3 * z", 2.0, 2e-3),
        ],
    )
    def test_precedence(self, src, z, want):
        assert_allclose(_at(parse_scalar_function(src), z)[0], want, rtol=1e-14)

    def test_coordinate_expression(self):
        e = parse_coordinate_expression("x*y - 2*z")
        x, y, z = jets.seed([1.5, 2.0, 0.5])
        u = e(x, y, z)
        assert_allclose(u.value, 2.0)
        assert_allclose(u.gradient, [2.0, 1.5, -2.0])


class TestSymbolicDerivative:
    @pytest.mark.parametrize("src", ["z^3 - z", "sqrt(1+z^2)/z", "exp(sin(z))*ln(2+z^2)", "cos(z)/(1+z^2)"])
    def test_matches_jet_derivative(self, src):
        spec = parse_scalar_function(src)
        d = spec.derivative()
        for z in (0.7, 1.9):
            v, d1, d2 = _at(spec, z)
            dv, dd1, _ = _at(d, z)
            assert_allclose(dv, d1, rtol=1e-12)
            assert_allclose(dd1, d2, rtol=1e-12)

    def test_keeps_full_budget(self):
        d = parse_scalar_function("z^4").derivative()
        u = d(jets.seed([0.0, 0.0, 2.0])[2])
        assert u.order == 3
        assert_allclose(u.derivative((0, 0, 3)), 24.0)


class TestParseErrors:
    @pytest.mark.parametrize(
        "src, pos",
        [
            ("z +", 3),
            ("2 * (z", 6),
            ("foo(z)", 0),
            ("z^1.5", 2),
            ("z ** 2", 3),
            ("", 0),
            ("sin z", 4),
            ("2^3^2", 3),
        ],
    )
    def test_position(self, src, pos):
        with pytest.raises(ParseError) as err:
            parse_scalar_function(src)
        assert err.value.position == pos
        assert err.value.expected

    def test_unknown_variable_in_scalar_function(self):
        with pytest.raises(ParseError):
            parse_scalar_function("x + z")

    def test_message_points_at_error(self):
        with pytest.raises(ParseError) as err:
            parse_scalar_function("z + )")
        assert "position 4" in str(err.value)
        assert str(err.value).splitlines()[-1] == "      ^"


class TestRandomComposites:
    def test_fd_agreement(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            src = random_composite(rng)
            e = parse_coordinate_expression(src)
            p = rng.uniform(-1.0, 1.0, 3)
            u = e(*jets.seed(p))
            grad, _ = jets.finite_difference_oracle(lambda q: e(*jets.seed(q)).value, p)
            assert_allclose(u.gradient, grad, atol=1e-7, err_msg=src)
