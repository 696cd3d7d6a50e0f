import json

import pytest

from fracmusielak import ConstantPower, LogPerturbed, VariableExponent
from fracmusielak.errors import DomainError
from fracmusielak.nonlocal_assembly import set_threads
from fracmusielak.verification_harness import SUITES, run_suite

FAST = ["norm_equiv", "modular_norm", "monotonicity", "clarkson", "gradient_fd", "embedding", "lebesgue_modular"]


@pytest.mark.parametrize("name", FAST)
@pytest.mark.parametrize("fixture", ["var_setup", "aniso2d"])
def test_suite_passes(request, name, fixture):
    setup = request.getfixturevalue(fixture)
    rep = run_suite(name, setup, seed=0, cases=4 if fixture == "aniso2d" else 10)
    assert rep.passed, rep.failures
    assert rep.cases == (4 if fixture == "aniso2d" else 10)
    json.dumps(rep.as_dict())


def test_poincare(var_setup):
    rep = run_suite("poincare", var_setup, cases=5)
    assert rep.passed
    levels = rep.stats["constant_per_level"]
    assert len(levels) == 3
    assert all(c > 0 for row in levels for c in row)


def test_lemma22_all_families(var_setup):
    fams = [ConstantPower(2.0), ConstantPower(3.5), LogPerturbed(2.2), VariableExponent.affine(2.0, 3.0, [0.0], [1.0])]
    rep = run_suite("lemma22", var_setup, cases=10_000, families=fams)
    assert rep.passed
    margins = rep.stats["min_relative_margin"]
    assert margins[repr(fams[0])] == pytest.approx(0.0, abs=1e-12)
    assert all(m >= -1e-9 for m in margins.values())


def test_clarkson_skips_sub_quadratic():
    from fracmusielak import AnisotropicSetup, Mesh, VariableExponentField

    m = Mesh.box([0.0], [1.0], 8)
    setup = AnisotropicSetup([ConstantPower(1.5)], [0.5], m, VariableExponentField.constant(2.0))
    rep = run_suite("clarkson", setup, cases=3)
    assert rep.stats["skipped_directions"] == [0]


def test_failures_are_reported(var_setup):
    # a tolerance below rounding cannot be met; every case must be listed with its inputs
    rep = run_suite("gradient_fd", var_setup, cases=3, rtol=1e-18)
    assert not rep.passed
    assert {f["case"] for f in rep.failures} == {0, 1, 2}
    assert all(f["lhs"] > f["rhs"] for f in rep.failures)


def test_deterministic_across_threads(aniso2d):
    try:
        set_threads(1)
        a = run_suite("gradient_fd", aniso2d, seed=5, cases=4).as_dict()
        set_threads(4)
        b = run_suite("gradient_fd", aniso2d, seed=5, cases=4).as_dict()
    finally:
        set_threads(None)
    a.pop("wall_time"), b.pop("wall_time")
    assert a == b


def test_seed_reproducible(var_setup):
    a = run_suite("gradient_fd", var_setup, seed=3, cases=3).stats
    b = run_suite("gradient_fd", var_setup, seed=3, cases=3).stats
    assert a == b


def test_unknown_suite(var_setup):
    with pytest.raises(DomainError, match="unknown suite"):
        run_suite("nope", var_setup)
    with pytest.raises(DomainError):
        run_suite("lemma22", var_setup, cases=0)


def test_registry():
    assert set(FAST) | {"lemma22", "poincare"} == set(SUITES)
