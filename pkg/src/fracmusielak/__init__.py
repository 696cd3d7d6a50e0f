"""Anisotropic fractional Musielak-Sobolev spaces and Kirchhoff eigenproblems, numerically.

Modules:

* ``musielak_core``: Musielak families, growth indices, comparison bounds.
* ``modular_spaces``: P1 meshes and functions, Lebesgue and Musielak modulars and norms.
* ``nonlocal_assembly``: the anisotropic modular Psi, seminorms, norms, energy and derivatives.
* ``eigensolver``: regime classification, sublinear and mountain-pass solvers, verification.
* ``verification_harness``: randomized property suites.
* ``cli``: the ``fracmusielak`` command.
"""

from .errors import (
    AccuracyWarning,
    CertificationError,
    ConfigError,
    ConsistencyError,
    ConvergenceError,
    DomainError,
    FracMusielakError,
    QuadratureError,
    RegimeError,
    SetupError,
)
from .musielak_core import (
    ConstantPower,
    Custom,
    GrowthIndices,
    LogPerturbed,
    MusielakFamily,
    VariableExponent,
)
from .modular_spaces import DiscreteFunction, Mesh, VariableExponentField
from .nonlocal_assembly import (
    AnisotropicSetup,
    KirchhoffNonlinearity,
    QuadratureConfig,
    aniso_modular_Psi,
    aniso_norms,
    energy,
    energy_gradient,
    modular_gradient,
)
from .eigensolver import (
    EigenSolution,
    SolverOptions,
    classify_regime,
    solve_mountain_pass,
    solve_sublinear,
    verify_eigen,
)

__version__ = "0.1.0"
