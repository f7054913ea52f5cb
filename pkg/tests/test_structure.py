import numpy as np
import pytest
from numpy.testing import assert_allclose

from parakmu import families
from parakmu.expr import parse_scalar_function
from parakmu.structure import (
    NonpositiveAlpha,
    OutOfDomain,
    axiom_residuals,
    check_nabla_xi,
    check_structure_axioms,
    classify_h_type,
    classify_values,
    compute_h,
    d_homothetic_deform,
    h_residuals,
    para_sasakian_residual,
    perturb_phi,
)

PASA_COMPONENTS = {
    "phi": [["0", "-2*y", "0"], ["0", "0", "1"], ["0", "1", "0"]],
    "xi": ["1", "0", "0"],
    "eta": ["1", "0", "2*y"],
    "g": [["1", "0", "2*y"], ["0", "1", "0"], ["2*y", "0", "-1 + 4*y^2"]],
}

INDICATORS = ("contact_volume", "signature")


class TestAxioms:
    def test_ex1_point(self, ex1):
        res = check_structure_axioms(ex1, [0.3, -0.8, 2.2])
        for name, v in res.items():
            assert v <= 1e-12, name
        assert check_nabla_xi(ex1, [0.3, -0.8, 2.2]) < 1e-12

    def test_ex1_batch(self, ex1):
        pts = np.array([[0.0, 0.0, 1.0], [1.0, -1.0, 3.0], [-0.5, 0.5, 0.7]])
        loc = ex1.at(pts)
        for name, arr in {**axiom_residuals(loc), **h_residuals(loc)}.items():
            assert arr.shape == (3,)
            assert arr.max() < 1e-11, name

    def test_ex1_metric_value(self, ex1):
        g = ex1.at([0.0, 0.0, 1.0]).g.value
        assert_allclose(g, [[1, 0, -1], [0, 1, -2], [-1, -2, 4]])

    def test_out_of_domain(self, ex1):
        with pytest.raises(OutOfDomain):
            ex1.at([0.0, 0.0, 0.0])


class TestH:
    @pytest.mark.parametrize("case", ["case1", "case2"])
    def test_closed_form(self, case):
        r, f, s = (parse_scalar_function(e) for e in ("1 + z^2", "sin(z)", "z - 1"))
        st = families.build_family(case, "1 + z^2", "sin(z)", "z - 1", (0.2, 2.0))
        p = [0.4, -0.6, 1.3]
        assert_allclose(compute_h(st, p), families.family_h(case, r, f, s, p), atol=1e-12)

    def test_ex1_entry(self, ex1):
        assert_allclose(compute_h(ex1, [0.0, 0.0, 3.0])[1, 1], -3.0)

    def test_types(self, ex1, synthetic):
        t = classify_h_type(ex1, [0.2, 0.1, 2.0])
        assert t.kind == "h1"
        assert_allclose(t.lam, 2.0, rtol=1e-12)
        t = classify_h_type(synthetic, [0.2, 0.1, 0.3])
        assert t.kind == "h3"
        assert_allclose(t.lam, 1.5, rtol=1e-12)
        pasa = families.custom_structure(PASA_COMPONENTS, label="pasa")
        assert classify_h_type(pasa, [0.1, 0.2, 0.3]).kind == "zero"

    def test_small_lambda_is_still_h1(self):
        st = families.build_family("case1", "1e-4", "0", "0", (0.5, 2.0))
        t = classify_h_type(st, [0.1, 0.1, 1.0])
        assert t.kind == "h1"
        assert_allclose(t.lam, 1e-4, rtol=1e-8)

    def test_classify_values(self):
        assert classify_values(0.0, 0.0, 0.0).kind == "zero"
        assert classify_values(0.0, 0.0, 1.0).kind == "h2"
        assert classify_values(4.0, 0.0, 2.0).kind == "h1"
        assert classify_values(-4.0, 0.0, 2.0).kind == "h3"
        assert classify_values(1.0, 0.5, 1.0).kind == "degenerate"


class TestDeformation:
    @pytest.mark.parametrize("alpha", [0.5, 2.0, 3.0])
    def test_axioms_preserved(self, ex1, alpha):
        d = d_homothetic_deform(ex1, alpha)
        res = check_structure_axioms(d, [0.5, 0.5, 1.5])
        assert max(res.values()) < 1e-11
        assert d.label == f"ex1|D{alpha:g}"
        assert d.manifest["deformations"] == [alpha]

    def test_h_scales(self, ex1):
        p = [0.5, 0.5, 1.5]
        assert_allclose(compute_h(d_homothetic_deform(ex1, 2.0), p), compute_h(ex1, p) / 2.0, atol=1e-12)

    @pytest.mark.parametrize("alpha", [0.0, -1.0, float("nan")])
    def test_rejects_nonpositive(self, ex1, alpha):
        with pytest.raises(NonpositiveAlpha):
            d_homothetic_deform(ex1, alpha)


class TestNegativeControl:
    def test_perturbation_detected(self, ex1):
        bad = perturb_phi(ex1, delta=1e-3)
        res = check_structure_axioms(bad, [0.3, 0.2, 1.8])
        assert 1e-4 <= max(v for k, v in res.items() if k not in INDICATORS) <= 1e-2
        assert res["phi_squared"] > 1e-4


class TestParaSasakian:
    def test_model_satisfies_condition(self):
        pasa = families.custom_structure(PASA_COMPONENTS, label="pasa")
        assert para_sasakian_residual(pasa, [0.1, -0.4, 0.9]) < 1e-12
        assert max(check_structure_axioms(pasa, [0.1, -0.4, 0.9]).values()) < 1e-12

    def test_ex1_does_not(self, ex1):
        assert para_sasakian_residual(ex1, [0.1, -0.4, 0.9]) > 1.0
