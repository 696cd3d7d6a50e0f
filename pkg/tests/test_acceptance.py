"""Acceptance gate: ten criteria, each printing one pass/fail line."""

import math
import time

import numpy as np
import pytest
from scipy import linalg

from fracmusielak import (
    AnisotropicSetup,
    ConstantPower,
    DiscreteFunction,
    KirchhoffNonlinearity,
    LogPerturbed,
    Mesh,
    VariableExponent,
    VariableExponentField,
)
from fracmusielak.eigensolver import (
    SolverOptions,
    embedding_constant,
    lambda_star,
    solve_mountain_pass,
    solve_sublinear,
    verify_eigen,
)
from fracmusielak.errors import ConvergenceError
from fracmusielak.modular_spaces import (
    lebesgue_luxemburg_norm,
    mass_matrix,
    musielak_luxemburg_norm,
)
from fracmusielak.musielak_core import lemma22_bounds
from fracmusielak.nonlocal_assembly import aniso_modular_Psi, modular_gradient, tail_bound
from fracmusielak.verification_harness import run_suite

# brute-force midpoint double sums (16384 points, exterior integrated analytically) for
# 1D, p = 2, s = 0.5, 32 cells; u = DiscreteFunction.random(mesh, default_rng(seed)) and the bump
PSI_ORACLE = {0: 32.197116679368165, 1: 28.2419536707294, 2: 24.470879927997277,
              3: 29.065007740970696, 4: 30.161607277137765}
PSI_ORACLE_BUMP = 3.811954414577483


def exact_power_integral_1d(u, p):
    # int |u|^p of a P1 function in closed form, cell by cell
    v = u.mesh.vertices[:, 0]
    c = u.coefficients
    total = 0.0
    for a, b, h in zip(c[:-1], c[1:], np.diff(v)):
        if a * b < 0:
            total += h * (abs(a) ** (p + 1) + abs(b) ** (p + 1)) / ((p + 1) * (abs(a) + abs(b)))
        elif abs(a - b) > 1e-12 * max(abs(a), abs(b)):
            total += h * (abs(b) ** (p + 1) - abs(a) ** (p + 1)) / ((p + 1) * (abs(b) - abs(a)))
        else:
            total += h * abs(a) ** p
    return total


def anisotropic_2d(cells):
    m = Mesh.box([0.0, 0.0], [1.0, 1.0], cells)
    return AnisotropicSetup([ConstantPower(2.5), VariableExponent.affine(2.0, 3.0, [0.0, 0.0], [1.0, 1.0])],
                            [0.5, 0.4], m, VariableExponentField.affine(2.1, 2.6, [0.0, 0.0], [1.0, 1.0]))


def log_perturbed_1d():
    m = Mesh.box([0.0], [1.0], 16)
    return AnisotropicSetup([LogPerturbed(2.2)], [0.5], m, VariableExponentField.affine(2.2, 3.0, [0.0], [1.0]))


def one_d(p, q, cells=32):
    m = Mesh.box([0.0], [1.0], cells)
    return AnisotropicSetup([ConstantPower(p)], [0.5], m, VariableExponentField.constant(q))


def test_01_luxemburg_exactness(criterion):
    t0 = time.perf_counter()
    mesh = Mesh.box([0.0], [1.0], 32)
    worst = 0.0
    for p in (1.5, 2.0, 2.5, 3.0, 4.0):
        q = VariableExponentField.constant(p)
        for seed in range(100):
            u = DiscreteFunction.random(mesh, np.random.default_rng(seed))
            integral = exact_power_integral_1d(u, p)
            worst = max(worst, abs(lebesgue_luxemburg_norm(u, q) / integral ** (1 / p) - 1),
                        abs(musielak_luxemburg_norm(u, ConstantPower(p)) / (integral / p) ** (1 / p) - 1))
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-8 and elapsed < 10
    criterion(1, "Luxemburg norms match closed forms", ok, f"max rel err {worst:.2e}, {elapsed:.1f}s")
    assert ok


def test_02_lemma22(criterion):
    families = [ConstantPower(1.5), ConstantPower(2.0), ConstantPower(3.7),
                VariableExponent.affine(2.0, 3.0, [0.0, 0.0], [1.0, 1.0]),
                VariableExponent.affine(1.4, 4.0, [0.0, 0.0], [1.0, 1.0]), LogPerturbed(2.2), LogPerturbed(3.0, 2.0)]
    rep = run_suite("lemma22", anisotropic_2d(4), seed=0, cases=10_000, families=families)
    # equality for pure powers, checked on the same kind of draws
    rng = np.random.default_rng(1)
    x, y = rng.random((10_000, 2)), rng.random((10_000, 2))
    t, sigma = 10.0 ** rng.uniform(-3, 3, 10_000), 10.0 ** rng.uniform(-2, 2, 10_000)
    eq = 0.0
    for fam in families[:3]:
        b = lemma22_bounds(fam, x, y, t, sigma)
        eq = max(eq, float(np.max(np.abs(b.lower / b.value - 1))), float(np.max(np.abs(b.upper / b.value - 1))))
    ok = rep.passed and eq <= 1e-12
    criterion(2, "two-sided scaling bounds, 1e4 cases per family", ok,
              f"{len(rep.failures)} violations over {len(families)} families, power equality {eq:.1e}")
    assert ok


def test_03_norm_chain(criterion):
    m = Mesh.box([0.0, 0.0], [1.0, 1.0], 16)
    setup = AnisotropicSetup([ConstantPower(2.2), ConstantPower(3.0)], [0.5, 0.4], m,
                             VariableExponentField.constant(2.5))
    t0 = time.perf_counter()
    rep = run_suite("norm_equiv", setup, seed=0, cases=100, slack=1e-7)
    elapsed = time.perf_counter() - t0
    del setup
    ok = rep.passed and elapsed < 300
    criterion(3, "norm equivalence chain, N=2, 16x16", ok,
              f"{len(rep.failures)} violations, lux/sum in {rep.stats['lux_over_sum']}, {elapsed:.0f}s")
    assert ok


def test_04_modular_norm(criterion):
    reps = [run_suite("modular_norm", s, seed=0, cases=100, slack=1e-7)
            for s in (anisotropic_2d(6), log_perturbed_1d())]
    ok = all(r.passed for r in reps)
    criterion(4, "modular-norm relations at ||u|| in {0.5, 2}", ok,
              f"{sum(len(r.failures) for r in reps)} violations over 2 x 100 functions")
    assert ok


def test_05_gradient_fidelity(criterion):
    m = Mesh.box([0.0, 0.0], [1.0, 1.0], 6)
    setup = AnisotropicSetup([LogPerturbed(2.2), VariableExponent.affine(2.0, 3.0, [0.0, 0.0], [1.0, 1.0])],
                             [0.5, 0.4], m, VariableExponentField.affine(2.1, 2.6, [0.0, 0.0], [1.0, 1.0]),
                             KirchhoffNonlinearity.affine(1.0, 0.5))
    rep = run_suite("gradient_fd", setup, seed=0, cases=20, rtol=1e-5, eps=1e-5)
    worst = rep.stats["max_relative_error"]
    ok = rep.passed
    criterion(5, "gradients vs central differences, 20 pairs", ok,
              f"max rel err Psi {worst['psi']:.1e}, energy {worst['energy']:.1e}")
    assert ok


def test_06_linear_oracle(criterion):
    t0 = time.perf_counter()
    setup = one_d(2.0, 2.0)
    mesh = setup.mesh
    A = np.column_stack([modular_gradient(DiscreteFunction.hat(mesh, k), setup) for k in range(mesh.n_dofs)])
    sym = np.abs(A - A.T).max() / np.abs(A).max()
    u = DiscreteFunction.random(mesh, np.random.default_rng(0))
    lin = np.abs(modular_gradient(u, setup) - A @ u.interior_values).max() / np.abs(A @ u.interior_values).max()
    M = mass_matrix(mesh)
    w, V = linalg.eigh(A, M)
    b = DiscreteFunction.bump(mesh).interior_values
    lam = 1.05 * (b @ A @ b) / (b @ M @ b)
    try:
        sol = solve_mountain_pass(setup, lam, opts=SolverOptions(override_regime=True, max_iter=300))
    except ConvergenceError as exc:
        # no positive-energy critical point exists; the path maximum still aligns with the first mode
        sol = exc.solution
    c, v1 = sol.u.interior_values, V[:, 0]
    cos = abs(c @ M @ v1) / math.sqrt((c @ M @ c) * (v1 @ M @ v1))
    angle = math.degrees(math.acos(min(1.0, cos)))
    ray = (c @ A @ c) / (c @ M @ c) / w[0] - 1
    elapsed = time.perf_counter() - t0
    ok = sym < 1e-12 and lin < 1e-12 and angle < 5 and abs(ray) < 0.02 and elapsed < 120
    criterion(6, "linear p=2 oracle: symmetric A, first mode", ok,
              f"asym {sym:.1e}, angle {angle:.2f} deg, Rayleigh err {ray:.2e}, {elapsed:.1f}s")
    assert ok


def test_07_superlinear(criterion):
    setup = one_d(2.0, 4.0)
    t0 = time.perf_counter()
    rows = []
    ok = True
    for lam in (0.5, 1.0, 2.0):
        sol = solve_mountain_pass(setup, lam)
        ver = verify_eigen(sol, setup)
        ok &= sol.converged and sol.residual < 1e-5 and sol.energy > 0 and ver.passed
        rows.append(f"lam={lam:g}: E={sol.energy:.6g} res={sol.residual:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    criterion(7, "superlinear mountain pass, lambda in {0.5, 1, 2}", ok, "; ".join(rows) + f"; {elapsed:.1f}s")
    assert ok


def test_08_sublinear(criterion):
    setup = one_d(3.0, 2.0)
    t0 = time.perf_counter()
    c1 = embedding_constant(setup, 64)
    ls = lambda_star(setup, 0.9 * min(1.0, 1.0 / c1), c1)
    rows = []
    ok = True
    for frac in (8, 4, 2):
        sol = solve_sublinear(setup, ls / frac, opts=SolverOptions(c1=c1))
        ok &= sol.converged and sol.energy < 0 and sol.residual < 1e-6
        rows.append(f"lam*/{frac}: E={sol.energy:.3e} res={sol.residual:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 600
    criterion(8, "sublinear descent at lambda*/8, /4, /2", ok,
              f"lambda*={ls:.5g}; " + "; ".join(rows) + f"; {elapsed:.1f}s")
    assert ok


def test_09_monotonicity_clarkson(criterion):
    reps = []
    for setup in (anisotropic_2d(6), log_perturbed_1d()):
        reps.append(run_suite("monotonicity", setup, seed=0, cases=100, slack=1e-8))
        reps.append(run_suite("clarkson", setup, seed=0, cases=100, slack=1e-8))
    skipped = [r.stats["skipped_directions"] for r in reps if r.name == "clarkson"]
    ok = all(r.passed for r in reps) and not any(skipped)
    criterion(9, "monotonicity and Clarkson-type inequalities, 100 pairs", ok,
              f"{sum(len(r.failures) for r in reps)} violations")
    assert ok


def test_10_quadrature(criterion, capsys):
    setup = one_d(2.0, 2.0)
    errs, tails = [], []
    for seed, ref in PSI_ORACLE.items():
        u = DiscreteFunction.random(setup.mesh, np.random.default_rng(seed))
        psi = aniso_modular_Psi(u, setup)
        errs.append(abs(psi / ref - 1))
        tails.append(tail_bound(u, setup) / psi)
    bump = DiscreteFunction.bump(setup.mesh)
    psi_b = aniso_modular_Psi(bump, setup)
    fine = setup.with_mesh(setup.mesh.refine())
    psi_f = aniso_modular_Psi(DiscreteFunction.bump(fine.mesh), fine)
    doubling = abs(psi_f / psi_b - 1)
    ok = max(errs) < 0.01 and max(tails) < 0.005 and doubling < 0.02
    criterion(10, "quadrature vs brute-force oracle, tail, refinement", ok,
              f"oracle rel err {max(errs):.2e}, tail/Psi {max(tails):.2e} (random u); doubling {doubling:.2e}")
    # the bump decays slowly into the exterior; reported, not gated (see README)
    with capsys.disabled():
        print(f"\ninfo: bump Psi {psi_b:.6g} vs oracle {PSI_ORACLE_BUMP:.6g} "
              f"(rel {psi_b / PSI_ORACLE_BUMP - 1:+.2e}), tail/Psi {tail_bound(bump, setup) / psi_b:.2e}")
    assert ok
