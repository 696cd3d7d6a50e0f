import warnings

import numpy as np
import pytest

from fracmusielak import (
    AnisotropicSetup,
    ConstantPower,
    LogPerturbed,
    Mesh,
    VariableExponent,
    VariableExponentField,
)
from fracmusielak.errors import AccuracyWarning


@pytest.fixture(autouse=True)
def _quiet_accuracy():
    # truncation warnings are asserted explicitly where they matter
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AccuracyWarning)
        yield


@pytest.fixture(scope="session")
def mesh1():
    return Mesh.box([0.0], [1.0], 32)


@pytest.fixture(scope="session")
def p2_setup(mesh1):
    """1D, p = 2, s = 0.5, q = 2 on 32 cells."""
    return AnisotropicSetup([ConstantPower(2.0)], [0.5], mesh1, VariableExponentField.constant(2.0))


@pytest.fixture(scope="session")
def superlinear_setup(mesh1):
    return AnisotropicSetup([ConstantPower(2.0)], [0.5], mesh1, VariableExponentField.constant(4.0))


@pytest.fixture(scope="session")
def sublinear_setup(mesh1):
    return AnisotropicSetup([ConstantPower(3.0)], [0.5], mesh1, VariableExponentField.constant(2.0))


@pytest.fixture(scope="session")
def var_setup():
    """1D with a variable-exponent family and a variable reaction exponent."""
    m = Mesh.box([0.0], [1.0], 16)
    return AnisotropicSetup([VariableExponent.affine(2.0, 3.0, [0.0], [1.0])], [0.4], m,
                            VariableExponentField.affine(2.2, 3.5, [0.0], [1.0]))


@pytest.fixture(scope="session")
def aniso2d():
    m = Mesh.box([0.0, 0.0], [1.0, 1.0], 6)
    return AnisotropicSetup([LogPerturbed(2.2), VariableExponent.affine(2.0, 3.0, [0.0, 0.0], [1.0, 1.0])],
                            [0.5, 0.4], m, VariableExponentField.affine(2.1, 2.6, [0.0, 0.0], [1.0, 1.0]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion."""

    def record(number, title, passed, detail=""):
        line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
