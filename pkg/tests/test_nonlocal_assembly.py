import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracmusielak.errors import AccuracyWarning, DomainError, SetupError
from fracmusielak.modular_spaces import DiscreteFunction, Mesh, VariableExponentField, reaction_integral
from fracmusielak.musielak_core import ConstantPower, LogPerturbed, VariableExponent
from fracmusielak.nonlocal_assembly import (
    AnisotropicSetup,
    KirchhoffNonlinearity,
    QuadratureConfig,
    aniso_modular_Psi,
    aniso_norms,
    clarkson_gap,
    energy,
    energy_gradient,
    energy_hessian,
    fractional_stiffness,
    gagliardo_seminorm,
    holder_quotient,
    modular_gradient,
    modular_hessian,
    monotonicity_gap,
    pair_rule,
    psi_details,
    set_threads,
    tail_bound,
)

# brute-force midpoint double sums (16384 points, exterior integrated analytically)
# for the 1D p = 2, s = 0.5, 32-cell benchmark; u = DiscreteFunction.random(mesh, default_rng(seed))
PSI_ORACLE = {0: 32.197116679368165, 1: 28.2419536707294, 2: 24.470879927997277}
# adaptive dblquad of the Omega x Omega part, 8 cells, s = 0.5, u = random(default_rng(0))
OMEGA_ORACLE = {2.0: 6.977517559114392, 3.0: 10.62327852557793}


def rand(mesh, seed):
    return DiscreteFunction.random(mesh, np.random.default_rng(seed))


def fd_check(F, grad, u, v, eps=1e-5):
    fd = (F(u + v * eps) - F(u - v * eps)) / (2 * eps)
    an = float(grad(u) @ v.interior_values)
    return abs(fd - an) / abs(an)


class TestSetup:
    def test_family_count(self, mesh1):
        with pytest.raises(SetupError):
            AnisotropicSetup([ConstantPower(2.0)] * 2, [0.5, 0.5], mesh1, VariableExponentField.constant(2.0))

    @pytest.mark.parametrize("s", [0.0, 1.0, -0.2])
    def test_order_range(self, mesh1, s):
        with pytest.raises(SetupError):
            AnisotropicSetup([ConstantPower(2.0)], [s], mesh1, VariableExponentField.constant(2.0))

    def test_quadrature_config(self, mesh1):
        with pytest.raises(SetupError):
            QuadratureConfig(near_levels=1)
        with pytest.raises(SetupError):
            QuadratureConfig(tail_radius=1.5 * mesh1.diam).radius(mesh1)

    def test_kirchhoff(self):
        with pytest.raises(SetupError):
            KirchhoffNonlinearity.constant(0.0)
        assert all(KirchhoffNonlinearity.constant(2.0).check_invariants().values())
        inv = KirchhoffNonlinearity.affine(1.0, 1.0).check_invariants()
        assert inv["lower_bound"] and inv["growth"]
        # M_hat(t) = t + t^2/2 grows like t^2, faster than t^(1/theta) = t^(1/2)
        assert not inv["power_bound"]


class TestHolderQuotient:
    def test_constant(self, mesh1):
        z = DiscreteFunction.zero(mesh1)
        assert holder_quotient(z, [0.2], [0.7], 0.5) == 0.0
        assert holder_quotient(rand(mesh1, 0), [-1.0], [3.0], 0.5) == 0.0

    def test_hand_value(self):
        m = Mesh.box([0.0], [2.0], 2)
        u = DiscreteFunction.hat(m, 0)  # u(x) = x on [0, 1]
        assert holder_quotient(u, [0.5], [0.25], 0.5) == pytest.approx(0.5)

    def test_antisymmetric(self, mesh1):
        u = rand(mesh1, 1)
        assert holder_quotient(u, [0.3], [0.8], 0.4) == -holder_quotient(u, [0.8], [0.3], 0.4)

    def test_diagonal_rejected(self, mesh1):
        with pytest.raises(DomainError):
            holder_quotient(rand(mesh1, 0), [0.3], [0.3], 0.5)


class TestPsi:
    def test_zero(self, p2_setup, aniso2d):
        assert aniso_modular_Psi(DiscreteFunction.zero(p2_setup.mesh), p2_setup) == 0.0
        assert aniso_modular_Psi(DiscreteFunction.zero(aniso2d.mesh), aniso2d) == 0.0

    @pytest.mark.parametrize("seed", sorted(PSI_ORACLE))
    def test_double_sum_oracle(self, p2_setup, seed):
        u = rand(p2_setup.mesh, seed)
        assert aniso_modular_Psi(u, p2_setup) == pytest.approx(PSI_ORACLE[seed], rel=5e-3)

    @pytest.mark.parametrize("p", sorted(OMEGA_ORACLE))
    def test_omega_part_oracle(self, p):
        m = Mesh.box([0.0], [1.0], 8)
        setup = AnisotropicSetup([ConstantPower(p)], [0.5], m, VariableExponentField.constant(2.0))
        res = psi_details(rand(m, 0), setup)
        assert res.omega_part == pytest.approx(OMEGA_ORACLE[p], rel=2e-3)
        assert res.value == pytest.approx(res.omega_part + res.cross_part, rel=1e-13)

    @given(st.floats(1.01, 50.0))
    @settings(max_examples=15, deadline=None)
    def test_scaling_bounds(self, alpha):
        m = Mesh.box([0.0], [1.0], 8)
        setup = AnisotropicSetup([LogPerturbed(2.2)], [0.5], m, VariableExponentField.constant(2.0))
        u = rand(m, 3)
        base, val = aniso_modular_Psi(u, setup), aniso_modular_Psi(u * alpha, setup)
        assert alpha**setup.phi_minus_min * base * (1 - 1e-10) <= val
        assert val <= alpha**setup.phi_plus_max * base * (1 + 1e-10)

    def test_quadratic_form(self, p2_setup):
        A = fractional_stiffness(p2_setup).toarray()
        u = rand(p2_setup.mesh, 4)
        c = u.interior_values
        assert aniso_modular_Psi(u, p2_setup) == pytest.approx(0.5 * c @ A @ c, rel=1e-12)

    def test_accuracy_warning(self, p2_setup):
        import warnings

        with warnings.catch_warnings(record=True) as rec:
            warnings.simplefilter("always", AccuracyWarning)
            aniso_modular_Psi(DiscreteFunction.bump(p2_setup.mesh), p2_setup)
        assert any(issubclass(w.category, AccuracyWarning) for w in rec)

    def test_pair_symmetry(self, var_setup):
        # relabelling x <-> y in the kernel leaves every term unchanged
        rule = pair_rule(var_setup)
        fam, s = var_setup.families[0], var_setup.orders[0]
        t = np.abs(rule.D @ rand(var_setup.mesh, 5).interior_values) / rule.r**s
        a = fam.bind(rule.x, rule.y_kernel).Phi(t)
        b = fam.bind(rule.y_kernel, rule.x).Phi(t)
        assert np.allclose(a, b, rtol=1e-14, atol=0)

    def test_thread_count_does_not_change_result(self, aniso2d):
        u = rand(aniso2d.mesh, 6)
        try:
            set_threads(1)
            one = aniso_modular_Psi(u, aniso2d)
            g1 = modular_gradient(u, aniso2d)
            set_threads(3)
            three = aniso_modular_Psi(u, aniso2d)
            g3 = modular_gradient(u, aniso2d)
        finally:
            set_threads(None)
        assert one == three
        assert np.array_equal(g1, g3)

    def test_summation_modes(self, aniso2d):
        u = rand(aniso2d.mesh, 7)
        a = aniso_modular_Psi(u, aniso2d, QuadratureConfig(summation="compensated"))
        b = aniso_modular_Psi(u, aniso2d, QuadratureConfig(summation="pairwise"))
        assert a == pytest.approx(b, rel=1e-12)

    def test_mesh_mismatch(self, p2_setup):
        with pytest.raises(DomainError):
            aniso_modular_Psi(rand(Mesh.box([0.0], [1.0], 8), 0), p2_setup)


class TestTail:
    def test_zero(self, p2_setup):
        assert tail_bound(DiscreteFunction.zero(p2_setup.mesh), p2_setup) == 0.0

    def test_decay(self, p2_setup):
        u = rand(p2_setup.mesh, 8)
        R = 8.0 * p2_setup.mesh.diam
        a, b = tail_bound(u, p2_setup, R), tail_bound(u, p2_setup, 2 * R)
        rate = 2.0 ** (p2_setup.orders[0] * p2_setup.phi_minus_min)
        assert b <= a / rate
        assert b >= 0.8 * a / rate

    def test_truncation_covered(self, mesh1):
        setup = AnisotropicSetup([LogPerturbed(2.2)], [0.5], mesh1, VariableExponentField.constant(2.0))
        u = rand(mesh1, 9)
        R = 4.0 * mesh1.diam
        near = aniso_modular_Psi(u, setup, QuadratureConfig(tail_radius=R))
        far = aniso_modular_Psi(u, setup, QuadratureConfig(tail_radius=4 * R))
        assert 0.0 <= far - near <= tail_bound(u, setup, R)

    def test_radius_guard(self, p2_setup):
        with pytest.raises(DomainError):
            tail_bound(rand(p2_setup.mesh, 0), p2_setup, 1.0)


class TestSeminorms:
    def test_zero(self, aniso2d):
        z = DiscreteFunction.zero(aniso2d.mesh)
        assert gagliardo_seminorm(z, aniso2d, 0) == 0.0
        assert tuple(aniso_norms(z, aniso2d)) == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_unit_modular(self, mesh1, p):
        setup = AnisotropicSetup([ConstantPower(p)], [0.5], mesh1, VariableExponentField.constant(2.0))
        u = rand(mesh1, 10)
        n = gagliardo_seminorm(u, setup, 0)
        assert aniso_modular_Psi(u * (1.0 / n), setup) == pytest.approx(1.0, rel=1e-9)
        assert n == pytest.approx(aniso_modular_Psi(u, setup) ** (1.0 / p), rel=1e-9)

    def test_variable_family_unit_modular(self, var_setup):
        u = rand(var_setup.mesh, 11)
        n = gagliardo_seminorm(u, var_setup, 0)
        assert aniso_modular_Psi(u * (1.0 / n), var_setup) == pytest.approx(1.0, rel=1e-9)

    @given(st.floats(1e-2, 1e2))
    @settings(max_examples=15, deadline=None)
    def test_homogeneity(self, alpha):
        m = Mesh.box([0.0], [1.0], 8)
        setup = AnisotropicSetup([LogPerturbed(2.2)], [0.3], m, VariableExponentField.constant(2.0))
        u = rand(m, 12)
        assert gagliardo_seminorm(u * alpha, setup, 0) == pytest.approx(alpha * gagliardo_seminorm(u, setup, 0),
                                                                         rel=1e-9)

    def test_one_dimension_collapses(self, var_setup):
        n = aniso_norms(rand(var_setup.mesh, 13), var_setup)
        assert n.sum == n.max
        assert n.luxemburg == pytest.approx(n.sum, rel=1e-9)

    @pytest.mark.parametrize("seed", range(4))
    def test_chain_2d(self, aniso2d, seed):
        n = aniso_norms(rand(aniso2d.mesh, seed), aniso2d)
        assert n.max <= n.luxemburg * (1 + 1e-7)
        assert n.luxemburg <= 2 * n.max * (1 + 1e-7)
        assert n.luxemburg <= 2 * n.sum * (1 + 1e-7)
        assert n.sum <= 2 * n.luxemburg * (1 + 1e-7)


class TestGradients:
    def test_zero(self, aniso2d):
        z = DiscreteFunction.zero(aniso2d.mesh)
        assert not np.any(modular_gradient(z, aniso2d))
        assert not np.any(energy_gradient(z, aniso2d, 1.0))

    @pytest.mark.parametrize("name", ["var_setup", "aniso2d"])
    def test_psi_fd(self, request, name):
        setup = request.getfixturevalue(name)
        for seed in range(3):
            u, v = rand(setup.mesh, 2 * seed), rand(setup.mesh, 2 * seed + 1)
            err = fd_check(lambda w: aniso_modular_Psi(w, setup), lambda w: modular_gradient(w, setup), u, v)
            assert err < 1e-5

    @pytest.mark.parametrize("name", ["var_setup", "aniso2d"])
    def test_energy_fd(self, request, name):
        setup = request.getfixturevalue(name)
        setup = AnisotropicSetup(setup.families, setup.orders, setup.mesh, setup.exponent,
                                 KirchhoffNonlinearity.affine(1.0, 0.5))
        for seed in range(3):
            u, v = rand(setup.mesh, 2 * seed), rand(setup.mesh, 2 * seed + 1)
            err = fd_check(lambda w: energy(w, setup, 1.3), lambda w: energy_gradient(w, setup, 1.3), u, v)
            assert err < 1e-5

    def test_quadratic_stiffness_symmetric(self, p2_setup):
        m = p2_setup.mesh
        A = np.column_stack([modular_gradient(DiscreteFunction.hat(m, k), p2_setup) for k in range(m.n_dofs)])
        assert np.abs(A - A.T).max() <= 1e-12 * np.abs(A).max()
        assert np.allclose(A, fractional_stiffness(p2_setup).toarray(), rtol=1e-12, atol=1e-12)
        u = rand(m, 14)
        assert np.allclose(modular_gradient(u, p2_setup), A @ u.interior_values, rtol=1e-11, atol=1e-11)
        assert np.all(np.linalg.eigvalsh(A) > 0)

    def test_hessians(self, var_setup):
        u, v = rand(var_setup.mesh, 15), rand(var_setup.mesh, 16)
        eps = 1e-6
        c = v.interior_values
        fd = (modular_gradient(u + v * eps, var_setup) - modular_gradient(u - v * eps, var_setup)) / (2 * eps)
        H = modular_hessian(u, var_setup)
        assert np.allclose(H @ c, fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())
        fd = (energy_gradient(u + v * eps, var_setup, 2.0) - energy_gradient(u - v * eps, var_setup, 2.0)) / (2 * eps)
        H = energy_hessian(u, var_setup, 2.0)
        assert np.allclose(H @ c, fd, rtol=1e-5, atol=1e-6 * np.abs(fd).max())


class TestEnergy:
    def test_zero(self, superlinear_setup):
        assert energy(DiscreteFunction.zero(superlinear_setup.mesh), superlinear_setup, 1.0) == 0.0

    def test_unit_kirchhoff(self, var_setup):
        u = rand(var_setup.mesh, 17)
        psi = aniso_modular_Psi(u, var_setup)
        assert energy(u, var_setup, 2.5) == pytest.approx(psi - 2.5 * reaction_integral(u, var_setup.exponent),
                                                          rel=1e-13)

    def test_affine_kirchhoff(self, var_setup):
        setup = AnisotropicSetup(var_setup.families, var_setup.orders, var_setup.mesh, var_setup.exponent,
                                 KirchhoffNonlinearity.affine(2.0, 3.0))
        u = rand(setup.mesh, 18)
        psi = aniso_modular_Psi(u, setup)
        I = reaction_integral(u, setup.exponent)
        assert energy(u, setup, 0.7) == pytest.approx(2.0 * psi + 1.5 * psi**2 - 0.7 * I, rel=1e-13)

    def test_sublinear_seed_negative(self, sublinear_setup):
        b = DiscreteFunction.bump(sublinear_setup.mesh)
        values = [energy(b * 2.0**-k, sublinear_setup, 0.5) for k in range(1, 21)]
        assert any(v < 0 for v in values)
        assert values[-1] < 0


class TestMonotoneAndClarkson:
    def test_equal_functions(self, var_setup):
        u = rand(var_setup.mesh, 19)
        assert monotonicity_gap(u, u, var_setup, 0) == (0.0, 0.0)

    def test_quadratic_identity(self, p2_setup):
        u, v = rand(p2_setup.mesh, 20), rand(p2_setup.mesh, 21)
        lhs, rhs = monotonicity_gap(u, v, p2_setup, 0)
        assert lhs == pytest.approx(2.0 * rhs, rel=1e-12)
        lhs, rhs = clarkson_gap(u, v, p2_setup, 0)
        # the parallelogram law: equality for the quadratic modular
        assert lhs == pytest.approx(rhs, rel=1e-12)

    @pytest.mark.parametrize("fam", [ConstantPower(1.6), ConstantPower(3.0), LogPerturbed(2.2),
                                     VariableExponent.affine(2.0, 3.0, [0.0], [1.0])], ids=repr)
    def test_monotonicity_random(self, fam):
        m = Mesh.box([0.0], [1.0], 8)
        setup = AnisotropicSetup([fam], [0.5], m, VariableExponentField.constant(2.0))
        for seed in range(20):
            u, v = rand(m, 2 * seed), rand(m, 2 * seed + 1) * 3.0
            lhs, rhs = monotonicity_gap(u, v, setup, 0)
            assert rhs <= lhs * (1 + 1e-8)

    @pytest.mark.parametrize("fam", [ConstantPower(3.0), LogPerturbed(2.2)], ids=repr)
    def test_clarkson_random(self, fam):
        m = Mesh.box([0.0], [1.0], 8)
        setup = AnisotropicSetup([fam], [0.5], m, VariableExponentField.constant(2.0))
        for seed in range(20):
            u, v = rand(m, 2 * seed), rand(m, 2 * seed + 1)
            lhs, rhs = clarkson_gap(u, v, setup, 0)
            assert rhs <= lhs * (1 + 1e-8)


def test_mesh_doubling_bump(p2_setup):
    fine = p2_setup.with_mesh(p2_setup.mesh.refine())
    a = aniso_modular_Psi(DiscreteFunction.bump(p2_setup.mesh), p2_setup)
    b = aniso_modular_Psi(DiscreteFunction.bump(fine.mesh), fine)
    assert abs(b - a) / a < 0.02
    assert math.isfinite(a)
