import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracmusielak.errors import CertificationError, DomainError, SetupError
from fracmusielak.musielak_core import (
    ConstantPower,
    Custom,
    GrowthIndices,
    LogPerturbed,
    Phi,
    Phi_hat,
    Phi_inverse,
    SampleGrid,
    VariableExponent,
    certify_hypotheses,
    conjugate_Phi,
    conjugate_phi,
    default_grid,
    estimate_indices,
    integrability_diagnostic,
    lemma22_bounds,
    phi,
    sobolev_conjugate_inverse,
)

X = np.array([0.3])
Y = np.array([0.7])

# int_0^t s^(p-1) log(c + s) ds evaluated with mpmath at 30 digits
LOG_PERTURBED_PRIMITIVE = [
    (2.2, math.e, 1.0, 0.5559971540413996),
    (2.2, math.e, 3.7, 13.310079187903745),
    (2.2, math.e, 0.01, 1.8141483792125208e-5),
    (3.0, 2.0, 1.0, 0.33633327340003047),
    (3.0, 2.0, 3.7, 26.181350591702408),
    (3.0, 2.0, 0.01, 2.322965671088493e-7),
]


def affine_1d(lo=2.0, up=3.0):
    return VariableExponent.affine(lo, up, [0.0], [1.0])


def builtins():
    return [ConstantPower(2.0), ConstantPower(3.5), affine_1d(), LogPerturbed(2.2), LogPerturbed(3.0, 2.0)]


class TestPhi:
    def test_linear_case(self):
        assert phi(ConstantPower(2.0), X, Y, 3.0) == 3.0

    @pytest.mark.parametrize("fam", builtins(), ids=repr)
    def test_zero(self, fam):
        assert phi(fam, X, Y, 0.0) == 0.0
        assert Phi(fam, X, Y, 0.0) == 0.0

    def test_variable_exponent_value(self):
        fam = VariableExponent.affine(2.0, 4.0, [0.0], [1.0])
        x = y = np.array([0.5])
        assert fam.exponent(x, y) == pytest.approx(3.0)
        assert phi(fam, x, y, 2.0) == pytest.approx(4.0, rel=1e-14)

    @given(st.floats(1e-6, 1e6))
    def test_odd(self, t):
        for fam in builtins():
            assert phi(fam, X, Y, -t) == -phi(fam, X, Y, t)

    def test_batch_shapes(self):
        xs = np.random.default_rng(0).uniform(size=(7, 1))
        out = phi(affine_1d(), xs, xs[::-1], np.linspace(0.1, 2, 7))
        assert out.shape == (7,)


class TestPrimitive:
    def test_closed_forms(self):
        assert Phi(ConstantPower(2.0), X, Y, 2.0) == 2.0
        assert Phi(ConstantPower(3.0), X, Y, 1.0) == pytest.approx(1.0 / 3.0, rel=1e-15)

    @pytest.mark.parametrize("p, shift, t, expected", LOG_PERTURBED_PRIMITIVE)
    def test_log_perturbed_against_quadrature(self, p, shift, t, expected):
        assert Phi(LogPerturbed(p, shift), X, Y, t) == pytest.approx(expected, rel=1e-11)

    def test_negative_t_rejected(self):
        with pytest.raises(DomainError):
            Phi(ConstantPower(2.0), X, Y, -1.0)

    def test_phi_hat(self):
        assert Phi_hat(ConstantPower(2.0), X, 0.0) == 0.0
        assert Phi_hat(ConstantPower(2.0), X, 2.0) == 2.0
        assert Phi_hat(affine_1d(), np.array([0.5]), 1.0) == pytest.approx(0.4, rel=1e-14)

    def test_custom_quadrature_matches_closed_form(self):
        fam = Custom(lambda x, y, t: t**1.5, (3.5, 3.5))
        t = np.array([0.01, 0.5, 1.0, 4.0])
        assert np.allclose(Phi(fam, X, Y, t), t**3.5 / 3.5, rtol=1e-10)

    @given(st.floats(1e-4, 1e4))
    @settings(max_examples=50)
    def test_primitive_derivative_is_phi(self, t):
        fam = LogPerturbed(2.5)
        h = 1e-6 * t
        fd = (Phi(fam, X, Y, t + h) - Phi(fam, X, Y, t - h)) / (2 * h)
        assert fd == pytest.approx(phi(fam, X, Y, t), rel=1e-6)


class TestInverse:
    def test_examples(self):
        assert Phi_inverse(ConstantPower(2.0), X, 0.0) == 0.0
        assert Phi_inverse(ConstantPower(2.0), X, 2.0) == pytest.approx(2.0, rel=1e-12)

    def test_log_perturbed_round_trip(self):
        fam = LogPerturbed(2.2)
        v = 10.0 ** np.random.default_rng(3).uniform(-6, 6, 100)
        t = Phi_inverse(fam, X, v)
        assert np.allclose(Phi_hat(fam, X, t), v, rtol=1e-9, atol=0)

    def test_conjugate_phi(self):
        t = np.array([0.0, 0.5, 2.0])
        assert np.allclose(conjugate_phi(ConstantPower(2.0), X, Y, t), t)
        assert conjugate_phi(LogPerturbed(2.2), X, Y, 0.0) == 0.0

    @pytest.mark.parametrize("fam", [ConstantPower(3.0), LogPerturbed(2.2), affine_1d()], ids=repr)
    @pytest.mark.parametrize("t", [0.05, 1.0, 7.0])
    def test_young_equality(self, fam, t):
        # Phi(t) + Phi_bar(phi(t)) = t phi(t)
        a = phi(fam, X, Y, t)
        lhs = Phi(fam, X, Y, t) + conjugate_Phi(fam, X, Y, a)
        assert lhs == pytest.approx(t * a, rel=1e-8)

    def test_conjugate_methods_agree(self):
        fam = LogPerturbed(2.2)
        t = np.array([0.1, 1.0, 10.0])
        q = conjugate_Phi(fam, X, Y, t, method="quadrature")
        y = conjugate_Phi(fam, X, Y, t, method="young")
        assert np.allclose(q, y, rtol=1e-8)


class TestIndices:
    def test_p_equal_one_rejected(self):
        with pytest.raises(SetupError, match="1 < φ⁻"):
            ConstantPower(1.0)
        with pytest.raises(SetupError):
            GrowthIndices(3.0, 2.0)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.7])
    def test_constant_power_exact(self, p):
        est = estimate_indices(ConstantPower(p), default_grid([0.0], [1.0], 8, 32))
        assert est.lower == pytest.approx(p, rel=1e-12)
        assert est.upper == pytest.approx(p, rel=1e-12)

    def test_variable_exponent_inside(self):
        est = estimate_indices(affine_1d(), default_grid([0.0], [1.0], 16, 16))
        assert 2.0 <= est.lower <= est.upper <= 3.0

    @pytest.mark.parametrize("fam", builtins(), ids=repr)
    def test_builtins_certify(self, fam):
        est = estimate_indices(fam, default_grid([0.0], [1.0], 8, 24))
        assert fam.declared_indices.contains(est.lower, est.upper)

    def test_false_declaration_detected(self):
        fam = Custom(lambda x, y, t: t, (3.5, 4.0), Phi_closed=lambda x, y, t: t**3 / 3)
        with pytest.raises(CertificationError) as info:
            estimate_indices(fam, default_grid([0.0], [1.0], 4, 8))
        assert "ratio" in info.value.witness

    def test_empty_grid(self):
        with pytest.raises(DomainError):
            estimate_indices(ConstantPower(2.0), SampleGrid(np.zeros((0, 1)), np.zeros((0, 1)), np.ones(3)))


class TestHypotheses:
    def test_quadratic(self):
        rep = certify_hypotheses(ConstantPower(2.0), default_grid([0.0], [1.0], 8, 32))
        assert rep.passed
        assert rep.max_delta2_ratio == pytest.approx(4.0, rel=1e-12)

    def test_quartic_sqrt_convex(self):
        assert certify_hypotheses(ConstantPower(4.0), default_grid([0.0], [1.0], 4, 32)).sqrt_convex

    def test_log_perturbed(self):
        fam = LogPerturbed(2.2)
        rep = certify_hypotheses(fam, default_grid([0.0], [1.0], 8, 32))
        assert rep.passed
        assert rep.max_delta2_ratio <= 2.0 ** fam.declared_indices.upper

    def test_sub_quadratic_not_sqrt_convex(self):
        rep = certify_hypotheses(ConstantPower(1.5), default_grid([0.0], [1.0], 4, 32))
        assert not rep.sqrt_convex
        assert "sqrt_convex" in rep.witnesses


class TestLemma22:
    @pytest.mark.parametrize("p", [1.5, 2.0, 4.0])
    def test_power_equality(self, p):
        rng = np.random.default_rng(1)
        t = 10.0 ** rng.uniform(-3, 3, 200)
        sigma = 10.0 ** rng.uniform(-2, 2, 200)
        lo, up, val = lemma22_bounds(ConstantPower(p), X, Y, t, sigma)
        assert np.allclose(lo, val, rtol=1e-12)
        assert np.allclose(up, val, rtol=1e-12)

    def test_hand_case(self):
        lo, up, val = lemma22_bounds(ConstantPower(2.0), X, Y, 1.0, 2.0)
        assert (lo, up, val) == (2.0, 2.0, 2.0)

    def test_variable_exponent_containment(self):
        rng = np.random.default_rng(7)
        n = 10_000
        x, y = rng.uniform(size=(n, 1)), rng.uniform(size=(n, 1))
        t = 10.0 ** rng.uniform(-3, 3, n)
        sigma = 10.0 ** rng.uniform(-2, 2, n)
        assert lemma22_bounds(affine_1d(), x, y, t, sigma).holds(1e-9)

    @given(st.floats(1e-3, 1e3), st.floats(1e-2, 1e2).filter(lambda s: abs(s - 1) > 1e-9))
    def test_log_perturbed_property(self, t, sigma):
        assert lemma22_bounds(LogPerturbed(2.2), X, Y, t, sigma).holds(1e-9)

    def test_bad_arguments(self):
        with pytest.raises(DomainError):
            lemma22_bounds(ConstantPower(2.0), X, Y, 1.0, 1.0)
        with pytest.raises(DomainError):
            lemma22_bounds(ConstantPower(2.0), X, Y, 0.0, 2.0)


class TestSobolevConjugate:
    def test_zero(self):
        assert sobolev_conjugate_inverse(ConstantPower(1.5), X, 0.5, 1, 0.0) == 0.0

    @pytest.mark.parametrize("p", [1.2, 1.5, 1.9])
    @pytest.mark.parametrize("t", [0.1, 1.0, 20.0])
    def test_power_closed_form(self, p, t):
        # Phi_hat^-1(tau) = (p tau)^(1/p); integrand (p tau)^(1/p) tau^(-3/2)
        a = 1.0 / p - 1.5
        exact = p ** (1.0 / p) * t ** (a + 1.0) / (a + 1.0)
        assert sobolev_conjugate_inverse(ConstantPower(p), X, 0.5, 1, t) == pytest.approx(exact, rel=1e-8)

    def test_divergence_flagged(self):
        diag = integrability_diagnostic(ConstantPower(3.0), X, 0.5, 1)
        assert not diag.converges_at_zero
        assert diag.exponent_at_zero == pytest.approx(1.0 / 3.0, rel=1e-6)
        with pytest.raises(SetupError, match="diverges"):
            sobolev_conjugate_inverse(ConstantPower(3.0), X, 0.5, 1, 1.0)

    def test_divergence_at_infinity(self):
        diag = integrability_diagnostic(ConstantPower(1.5), X, 0.5, 1)
        assert diag.converges_at_zero
        assert not diag.diverges_at_infinity
        assert integrability_diagnostic(ConstantPower(2.0), X, 0.5, 1).diverges_at_infinity
