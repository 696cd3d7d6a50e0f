"""Anisotropic nonlocal modular, seminorms, norms and the Kirchhoff energy.

With ``D^s u(x, y) = (u(x) - u(y)) / |x - y|^s`` and ``dmu = dx dy / |x - y|^N``,

    Psi(u) = sum_i int_Q Phi_i(x, y, |D^{s_i} u|) dmu,
    T_lam(u) = M_hat(Psi(u)) - lam int_Omega |u|^q(x) / q(x) dx,

where Q = R^N x R^N minus (C Omega x C Omega). Integrals over Q use the
positive-weight pair rules of ``_pairs``; the exterior is truncated to a
box of half-width ``R`` about the domain centre and the omitted mass is
bounded by :func:`tail_bound`.
"""

from __future__ import annotations

import math
import os
import warnings
import weakref
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import sparse

from . import _pairs
from ._numerics import luxemburg_brent, reduce_sum
from .errors import AccuracyWarning, ConsistencyError, DomainError, SetupError
from .modular_spaces import (
    DiscreteFunction,
    Mesh,
    VariableExponentField,
    omega_rule,
    reaction_rule,
    reaction_integral,
    reaction_load,
)
from .musielak_core import MusielakFamily

__all__ = [
    "KirchhoffNonlinearity",
    "QuadratureConfig",
    "AnisotropicSetup",
    "AnisoNorms",
    "PsiResult",
    "holder_quotient",
    "aniso_modular_Psi",
    "psi_details",
    "tail_bound",
    "gagliardo_seminorm",
    "aniso_norms",
    "modular_gradient",
    "modular_hessian",
    "fractional_stiffness",
    "energy",
    "energy_gradient",
    "energy_hessian",
    "monotonicity_gap",
    "clarkson_gap",
    "set_threads",
    "get_threads",
]

THREADS_ENV = "FRACMUSIELAK_THREADS"


# ---------------------------------------------------------------------------
# problem data


class KirchhoffNonlinearity:
    """``M`` with primitive ``M_hat``, lower bound ``m0`` and growth constant ``theta``.

    Required on construction: ``M >= m0 > 0`` and ``t M(t) <= theta M_hat(t)``
    on a sample of ``t``; :meth:`check_invariants` also reports the
    power bound ``M_hat(t) <= M_hat(1) t^(1/theta)`` for ``t >= 1``.
    """

    def __init__(self, M: Callable, M_hat: Callable, m0: float, theta: float, dM: Callable | None = None,
                 kind: str = "custom", params: dict | None = None):
        self.M = M
        self.M_hat = M_hat
        self.dM = dM if dM is not None else (lambda t: 0.0 * np.asarray(t, dtype=float))
        self.m0 = float(m0)
        self.theta = float(theta)
        self.kind = kind
        self.params = params or {}
        if not self.m0 > 0:
            raise SetupError("kirchhoff.m0 must be positive")
        if not self.theta >= 1.0:
            raise SetupError("kirchhoff.theta must be >= 1")
        inv = self.check_invariants()
        if not inv["lower_bound"]:
            raise SetupError("kirchhoff: M(t) >= m0 fails on the sample")
        if not inv["growth"]:
            raise SetupError("kirchhoff: t M(t) <= theta M_hat(t) fails on the sample")

    @classmethod
    def constant(cls, m0: float = 1.0):
        m0 = float(m0)
        return cls(lambda t: m0 + 0.0 * np.asarray(t, dtype=float), lambda t: m0 * np.asarray(t, dtype=float),
                   m0, 1.0, kind="constant", params={"m0": m0})

    @classmethod
    def affine(cls, m0: float = 1.0, b: float = 1.0):
        """``M(t) = m0 + b t`` with ``theta = 2``."""
        m0, b = float(m0), float(b)
        if b < 0:
            raise SetupError("kirchhoff.b must be nonnegative")
        return cls(lambda t: m0 + b * np.asarray(t, dtype=float),
                   lambda t: m0 * np.asarray(t, dtype=float) + 0.5 * b * np.asarray(t, dtype=float) ** 2,
                   m0, 2.0, dM=lambda t: b + 0.0 * np.asarray(t, dtype=float), kind="affine",
                   params={"m0": m0, "b": b})

    def check_invariants(self, samples=None) -> dict:
        t = np.logspace(-8, 8, 161) if samples is None else np.asarray(samples, dtype=float)
        M, Mh = np.asarray(self.M(t)), np.asarray(self.M_hat(t))
        big = t[t >= 1.0]
        power = np.asarray(self.M_hat(big)) <= float(self.M_hat(1.0)) * big ** (1.0 / self.theta) * (1 + 1e-12)
        return {
            "lower_bound": bool(np.all(M >= self.m0 * (1 - 1e-12))),
            "growth": bool(np.all(t * M <= self.theta * Mh * (1 + 1e-12) + 1e-300)),
            "power_bound": bool(np.all(power)),
        }

    def describe(self) -> dict:
        return {"kind": self.kind, "m0": self.m0, "theta": self.theta, **self.params}


@dataclass(frozen=True)
class QuadratureConfig:
    """Pair-quadrature parameters.

    ``near_levels`` is the number of geometric grading panels toward each
    singular point; ``tail_radius`` is the half-width ``R`` of the exterior
    truncation box about the domain centre (default ``8 diam``).
    ``far_field_ratio``/``far_order`` select a cheaper rule for well
    separated cell pairs.
    """

    gauss_order: int = 3
    near_levels: int = 4
    tail_radius: float | None = None
    summation: str = "compensated"
    far_field_ratio: float = 3.0
    far_order: int = 2

    def __post_init__(self):
        if self.gauss_order < 1:
            raise SetupError("quadrature.gauss_order must be >= 1")
        if self.near_levels < 2:
            raise SetupError("quadrature.near_levels must be >= 2")
        if self.summation not in ("compensated", "pairwise"):
            raise SetupError("quadrature.summation must be 'compensated' or 'pairwise'")
        if self.far_order < 1 or self.far_field_ratio <= 0:
            raise SetupError("quadrature.far_order >= 1 and far_field_ratio > 0 required")

    def radius(self, mesh: Mesh) -> float:
        R = 8.0 * mesh.diam if self.tail_radius is None else float(self.tail_radius)
        if R < 2.0 * mesh.diam * (1 - 1e-12):
            raise SetupError(f"quadrature.tail_radius must be >= 2 diam = {2 * mesh.diam:g}")
        return R

    def key(self, mesh: Mesh):
        return (self.gauss_order, self.near_levels, self.radius(mesh), self.far_field_ratio, self.far_order)


@dataclass(frozen=True, eq=False)
class AnisotropicSetup:
    """Families ``Phi_i`` with orders ``s_i`` (one per direction), domain mesh, exponent and ``M``."""

    families: tuple
    orders: tuple
    mesh: Mesh
    exponent: VariableExponentField
    kirchhoff: KirchhoffNonlinearity = field(default_factory=KirchhoffNonlinearity.constant)

    def __post_init__(self):
        fams = tuple(self.families)
        orders = tuple(float(s) for s in self.orders)
        object.__setattr__(self, "families", fams)
        object.__setattr__(self, "orders", orders)
        N = self.mesh.dim
        if len(fams) != N or len(orders) != N:
            raise SetupError(f"need exactly N = {N} families and orders (got {len(fams)}, {len(orders)})")
        for i, s in enumerate(orders):
            if not 0.0 < s < 1.0:
                raise SetupError(f"orders[{i}] = {s:g} must lie in (0, 1)")
        for i, f in enumerate(fams):
            if not isinstance(f, MusielakFamily):
                raise SetupError(f"families[{i}] is not a MusielakFamily")
        self.exponent.validate(omega_rule(DiscreteFunction.bump(self.mesh), split=False).points)

    @property
    def N(self) -> int:
        return self.mesh.dim

    @property
    def phi_plus_max(self) -> float:
        return max(f.declared_indices.upper for f in self.families)

    @property
    def phi_minus_min(self) -> float:
        return min(f.declared_indices.lower for f in self.families)

    @property
    def phi_minus_max(self) -> float:
        return max(f.declared_indices.lower for f in self.families)

    def with_mesh(self, mesh: Mesh) -> "AnisotropicSetup":
        return AnisotropicSetup(self.families, self.orders, mesh, self.exponent, self.kirchhoff)

    def with_exponent(self, exponent: VariableExponentField) -> "AnisotropicSetup":
        return AnisotropicSetup(self.families, self.orders, self.mesh, exponent, self.kirchhoff)

    def describe(self) -> dict:
        return {
            "N": self.N,
            "families": [f.describe() for f in self.families],
            "orders": list(self.orders),
            "exponent": self.exponent.describe(),
            "kirchhoff": self.kirchhoff.describe(),
            "domain": {"lower": self.mesh.lower.tolist(), "upper": self.mesh.upper.tolist(),
                       "cells": list(self.mesh.cells_per_axis)},
        }


# ---------------------------------------------------------------------------
# threading


_threads = None


def set_threads(n: int | None) -> None:
    """Cap the worker threads used for pair evaluation (None: environment/default)."""
    global _threads
    _threads = None if n is None else max(1, int(n))


def get_threads() -> int:
    if _threads is not None:
        return _threads
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


_CHUNK = 1 << 18


# ---------------------------------------------------------------------------
# assembler cache


class _Assembler:
    def __init__(self, setup: AnisotropicSetup, qc: QuadratureConfig):
        self.setup = setup
        self.qc = qc
        self.R = qc.radius(setup.mesh)
        self.rule = _pairs.build(setup.mesh, qc, self.R)
        self.DT = self.rule.D.T.tocsr()
        # keep a single copy of the difference operator
        self.rule.D = self.DT.T
        rule = self.rule
        self.kernels = []
        self.rs = []
        for fam, s in zip(setup.families, setup.orders):
            self.kernels.append(fam.bind(rule.x, rule.y_kernel))
            self.rs.append(rule.r**s)

    def diff(self, u: DiscreteFunction) -> np.ndarray:
        return self.rule.D @ u.interior_values

    def sum(self, v, mask=None) -> float:
        if mask is not None:
            v = v[mask]
        return reduce_sum(v, self.qc.summation)

    def psi_i(self, i, d, scale=1.0, mask=None):
        return self.sum(self._terms(i, d, scale), mask)

    def scaled_psi_i(self, i, d, mask=None):
        """``lam -> int Phi_i(|D u| / lam)``; homogeneous families are evaluated once."""
        k = self.kernels[i].degree
        if k is None:
            return lambda lam: self.psi_i(i, d, lam, mask)
        if np.ndim(k) == 0:
            base = self.psi_i(i, d, 1.0, mask)
            return lambda lam: base * lam ** (-k)
        terms = self._terms(i, d)
        if mask is not None:
            terms, k = terms[mask], k[mask]
        keep = terms > 0
        terms, k = terms[keep], k[keep]
        return lambda lam: self.sum(terms * np.exp(-math.log(lam) * k))

    def _terms(self, i, d, scale=1.0):
        k, rs, w = self.kernels[i], self.rs[i], self.rule.w
        t = np.abs(d) / (scale * rs)
        n = len(t)
        nthreads = get_threads()
        if nthreads <= 1 or n <= _CHUNK:
            return w * k.Phi(t)
        bounds = [(a, min(a + _CHUNK, n)) for a in range(0, n, _CHUNK)]
        with ThreadPoolExecutor(max_workers=nthreads) as ex:
            parts = list(ex.map(lambda b: w[b[0]:b[1]] * k.slice(b[0], b[1]).Phi(t[b[0]:b[1]]), bounds))
        return np.concatenate(parts)

    def grad_i(self, i, d):
        k, rs, w = self.kernels[i], self.rs[i], self.rule.w
        return self.DT @ (w * k.phi(d / rs) / rs)

    def hess_i(self, i, d):
        k, rs, w = self.kernels[i], self.rs[i], self.rule.w
        c = w * k.dphi(np.abs(d) / rs) / rs**2
        return self.DT @ sparse.diags(c) @ self.rule.D


_CACHE: "weakref.WeakKeyDictionary[AnisotropicSetup, dict]" = weakref.WeakKeyDictionary()


def _assembler(setup: AnisotropicSetup, qc: QuadratureConfig | None) -> _Assembler:
    qc = qc or QuadratureConfig(gauss_order=setup.mesh.gauss_order)
    per = _CACHE.setdefault(setup, {})
    key = qc.key(setup.mesh)
    if key not in per:
        per[key] = _Assembler(setup, qc)
    asm = per[key]
    if asm.qc.summation != qc.summation:
        asm = _Assembler.__new__(_Assembler)
        asm.__dict__.update(per[key].__dict__)
        asm.qc = qc
    return asm


def _check_mesh(u: DiscreteFunction, setup: AnisotropicSetup):
    if u.mesh is not setup.mesh:
        raise DomainError("function and setup live on different meshes")


# ---------------------------------------------------------------------------
# operations


def holder_quotient(u: DiscreteFunction, x, y, s: float) -> float:
    """``(u(x) - u(y)) / |x - y|^s`` with the zero extension of ``u``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    r = float(np.linalg.norm(x - y))
    if r == 0.0:
        raise DomainError("holder_quotient needs x != y")
    ux, uy = u(np.stack([x, y]))
    return float((ux - uy) / r**s)


@dataclass
class PsiResult:
    value: float
    per_direction: list
    omega_part: float
    cross_part: float
    tail_bound: float
    accuracy_warning: bool

    def as_dict(self):
        return dict(self.__dict__)


def psi_details(u: DiscreteFunction, setup: AnisotropicSetup, qc: QuadratureConfig | None = None) -> PsiResult:
    """Psi with its split into directions and into the Omega x Omega / cross parts."""
    _check_mesh(u, setup)
    asm = _assembler(setup, qc)
    if u.is_zero():
        return PsiResult(0.0, [0.0] * setup.N, 0.0, 0.0, 0.0, False)
    d = asm.diff(u)
    per, om, cr = [], 0.0, 0.0
    for i in range(setup.N):
        terms = asm._terms(i, d)
        per.append(asm.sum(terms))
        om += asm.sum(terms, asm.rule.in_omega)
        cr += asm.sum(terms, ~asm.rule.in_omega)
    value = math.fsum(per)
    tb = tail_bound(u, setup, asm.R)
    warn = tb > 0.01 * value
    return PsiResult(value, per, om, cr, tb, warn)


def aniso_modular_Psi(u: DiscreteFunction, setup: AnisotropicSetup, qc: QuadratureConfig | None = None) -> float:
    """``Psi(u) = sum_i int_Q Phi_i(|D^{s_i} u|) dmu``.

    Emits :class:`AccuracyWarning` when the truncation tail bound exceeds
    1% of the value.
    """
    res = psi_details(u, setup, qc)
    if res.accuracy_warning:
        warnings.warn(f"tail bound {res.tail_bound:.3g} exceeds 1% of Psi = {res.value:.3g}", AccuracyWarning,
                      stacklevel=2)
    return res.value


def _psi_fast(asm: _Assembler, d: np.ndarray, scale: float = 1.0, directions=None, mask=None) -> float:
    dirs = range(asm.setup.N) if directions is None else directions
    return math.fsum(asm.sum(asm._terms(i, d, scale), mask) for i in dirs)


_UNIT_BALL_SURFACE = {1: 2.0, 2: 2.0 * math.pi}


def tail_bound(u: DiscreteFunction, setup: AnisotropicSetup, R: float | None = None) -> float:
    """Upper bound on the part of Psi omitted by truncating the exterior at ``R``.

    Every omitted pair has ``x`` in the domain, ``u(y) = 0`` and
    ``|x - y| >= R_eff = R - (smallest half-width)``. Using
    ``Phi(t / r^s) <= r^(-s phi^-) Phi(t)`` for ``r >= 1`` (``r^(-s phi^+)``
    for ``r < 1``) and ``Phi(x, y, t) <= sup Phi(., ., 1) max(t^phi-, t^phi+)``,

        tail <= sum_i 2 |S^(N-1)| sup_i(1) int_Omega max(|u|^phi-, |u|^phi+) dx
                  * int_{R_eff}^inf b_i(r) dr / r.
    """
    mesh = setup.mesh
    R = 8.0 * mesh.diam if R is None else float(R)
    if R < 2.0 * mesh.diam * (1 - 1e-12):
        raise DomainError("tail_bound needs R >= 2 diam")
    if u.is_zero():
        return 0.0
    r0 = R - 0.5 * float(np.min(mesh.upper - mesh.lower))
    rule = omega_rule(u)
    a = np.abs(rule.values)
    total = 0.0
    for fam, s in zip(setup.families, setup.orders):
        lo, up = fam.declared_indices.lower, fam.declared_indices.upper
        sup_one = fam.sup_Phi_one()
        if sup_one is None:
            from .musielak_core import certify_hypotheses, default_grid
            sup_one = certify_hypotheses(fam, default_grid(mesh.lower, mesh.upper, 16, 4)).sup_Phi_one
        mass = reduce_sum(rule.weights * np.maximum(a**lo, a**up))
        # int_{r0}^inf b(r) dr / r with b = r^(-s up) on (r0, 1) and r^(-s lo) beyond 1
        if r0 >= 1.0:
            radial = r0 ** (-s * lo) / (s * lo)
        else:
            radial = (r0 ** (-s * up) - 1.0) / (s * up) + 1.0 / (s * lo)
        total += 2.0 * _UNIT_BALL_SURFACE[mesh.dim] * sup_one * mass * radial
    return total


def gagliardo_seminorm(u: DiscreteFunction, setup: AnisotropicSetup, i: int, qc: QuadratureConfig | None = None,
                       region: str = "Q", rtol: float = 1e-10) -> float:
    """``[u]_i = inf{lam > 0 : int Phi_i(|D^{s_i} u| / lam) dmu <= 1}``.

    ``region='omega'`` restricts the pair integral to Omega x Omega.
    """
    _check_mesh(u, setup)
    if not 0 <= i < setup.N:
        raise DomainError(f"direction index {i} out of range")
    if u.is_zero():
        return 0.0
    asm = _assembler(setup, qc)
    d = asm.diff(u)
    mask = None
    if region == "omega":
        mask = asm.rule.in_omega
    elif region != "Q":
        raise DomainError("region must be 'Q' or 'omega'")
    fam = setup.families[i]
    return _lux(asm.scaled_psi_i(i, d, mask), fam.declared_indices.lower, fam.declared_indices.upper, rtol)


def _lux(modular, lo_idx, up_idx, rtol):
    m1 = modular(1.0)
    if m1 == 0.0:
        return 0.0
    # growth indices bracket the root: Psi(u/lam) lies between lam^-up m1 and lam^-lo m1
    a, b = m1 ** (1.0 / up_idx), m1 ** (1.0 / lo_idx)
    lo, hi = min(a, b), max(a, b)
    if hi / lo - 1.0 < 1e-14:
        lo, hi = lo * (1 - 1e-12), hi * (1 + 1e-12)
    return luxemburg_brent(modular, lo, hi, rtol=rtol)


@dataclass
class AnisoNorms:
    sum: float
    max: float
    luxemburg: float
    seminorms: list
    psi: float

    def __iter__(self):
        return iter((self.sum, self.max, self.luxemburg))

    def chain_slack(self, N: int) -> dict:
        """Margins of the equivalence chain; nonnegative means the inequality holds."""
        return {
            "max_le_sum": self.sum - self.max,
            "sum_le_N_max": N * self.max - self.sum,
            "sum_le_N_lux": N * self.luxemburg - self.sum,
            "lux_le_N_sum": N * self.sum - self.luxemburg,
        }

    def as_dict(self):
        return dict(self.__dict__)


def aniso_norms(u: DiscreteFunction, setup: AnisotropicSetup, qc: QuadratureConfig | None = None,
                slack: float = 1e-7, rtol: float = 1e-10) -> AnisoNorms:
    """Sum and max of the seminorms and the Luxemburg norm of Psi."""
    _check_mesh(u, setup)
    if u.is_zero():
        return AnisoNorms(0.0, 0.0, 0.0, [0.0] * setup.N, 0.0)
    asm = _assembler(setup, qc)
    d = asm.diff(u)
    mods = [asm.scaled_psi_i(i, d) for i in range(setup.N)]
    semis = [_lux(m, fam.declared_indices.lower, fam.declared_indices.upper, rtol)
             for m, fam in zip(mods, setup.families)]
    psi = math.fsum(m(1.0) for m in mods)
    lux = _lux(lambda lam: math.fsum(m(lam) for m in mods), setup.phi_minus_min, setup.phi_plus_max, rtol)
    out = AnisoNorms(math.fsum(semis), max(semis), lux, semis, psi)
    worst = min(out.chain_slack(setup.N).values())
    if worst < -slack * max(out.sum, 1.0):
        raise ConsistencyError(f"norm equivalence chain violated by {-worst:.3g}: {out.chain_slack(setup.N)}")
    return out


def modular_gradient(u: DiscreteFunction, setup: AnisotropicSetup, qc: QuadratureConfig | None = None) -> np.ndarray:
    """``g_k = sum_i int_Q a_i(|D u|) D u D e_k dmu`` over interior vertices ``k``."""
    _check_mesh(u, setup)
    asm = _assembler(setup, qc)
    d = asm.diff(u)
    return sum(asm.grad_i(i, d) for i in range(setup.N))


def modular_hessian(u: DiscreteFunction, setup: AnisotropicSetup, qc: QuadratureConfig | None = None):
    """Sparse Hessian of Psi at ``u`` (finite where every ``phi_i`` is differentiable)."""
    _check_mesh(u, setup)
    asm = _assembler(setup, qc)
    d = asm.diff(u)
    H = asm.hess_i(0, d)
    for i in range(1, setup.N):
        H = H + asm.hess_i(i, d)
    return H.tocsr()


def fractional_stiffness(setup: AnisotropicSetup, qc: QuadratureConfig | None = None):
    """Sparse matrix of ``u -> sum_i int_Q |D^{s_i} u|^2 dmu`` (symmetric positive definite)."""
    asm = _assembler(setup, qc)
    rule = asm.rule
    c = sum(rule.w / rs**2 for rs in asm.rs)
    return (asm.DT @ sparse.diags(c) @ rule.D).tocsr()


def energy(u: DiscreteFunction, setup: AnisotropicSetup, lam: float, qc: QuadratureConfig | None = None) -> float:
    """``T_lam(u) = M_hat(Psi(u)) - lam int |u|^q / q``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    _check_mesh(u, setup)
    if u.is_zero():
        return 0.0
    asm = _assembler(setup, qc)
    psi = _psi_fast(asm, asm.diff(u))
    return float(setup.kirchhoff.M_hat(psi)) - lam * reaction_integral(u, setup.exponent)


def energy_gradient(u: DiscreteFunction, setup: AnisotropicSetup, lam: float,
                    qc: QuadratureConfig | None = None) -> np.ndarray:
    """``M(Psi(u)) Psi'(u) - lam [int |u|^(q-2) u e_k]_k``."""
    if not lam > 0:
        raise DomainError("lambda must be positive")
    _check_mesh(u, setup)
    if u.is_zero():
        return np.zeros(setup.mesh.n_dofs)
    asm = _assembler(setup, qc)
    d = asm.diff(u)
    psi = _psi_fast(asm, d)
    g = sum(asm.grad_i(i, d) for i in range(setup.N))
    return float(setup.kirchhoff.M(psi)) * g - lam * reaction_load(u, setup.exponent)


def energy_hessian(u: DiscreteFunction, setup: AnisotropicSetup, lam: float, qc: QuadratureConfig | None = None):
    """Dense Hessian of ``T_lam`` (used for Newton polishing)."""
    asm = _assembler(setup, qc)
    d = asm.diff(u)
    psi = _psi_fast(asm, d)
    g = sum(asm.grad_i(i, d) for i in range(setup.N))
    H = modular_hessian(u, setup, qc).toarray()
    K = setup.kirchhoff
    H = float(K.M(psi)) * H + float(K.dM(psi)) * np.outer(g, g)
    return H - lam * _reaction_hessian(u, setup.exponent)


def _reaction_hessian(u: DiscreteFunction, q: VariableExponentField) -> np.ndarray:
    m = u.mesh
    rule = reaction_rule(u)
    qv = q(rule.points)
    with np.errstate(divide="ignore", invalid="ignore"):
        c = rule.weights * (qv - 1.0) * np.abs(rule.values) ** (qv - 2.0)
    c = np.where(np.isfinite(c), c, 0.0)
    dof = -np.ones(m.n_vertices, dtype=np.int64)
    dof[m.interior] = np.arange(m.n_dofs)
    ids = dof[rule.vertex_ids]
    k = ids.shape[1]
    H = np.zeros((m.n_dofs, m.n_dofs))
    for a in range(k):
        for b in range(k):
            ok = (ids[:, a] >= 0) & (ids[:, b] >= 0)
            np.add.at(H, (ids[ok, a], ids[ok, b]), c[ok] * rule.bary[ok, a] * rule.bary[ok, b])
    return H


def monotonicity_gap(u: DiscreteFunction, v: DiscreteFunction, setup: AnisotropicSetup, i: int,
                     qc: QuadratureConfig | None = None):
    """``(lhs, rhs)`` of ``int (a(|A|)A - a(|B|)B)(A - B) dmu >= 4 int Phi(|A - B| / 2) dmu``.

    ``A = D^{s_i} u`` and ``B = D^{s_i} v``.
    """
    _check_mesh(u, setup)
    _check_mesh(v, setup)
    asm = _assembler(setup, qc)
    k, rs, w = asm.kernels[i], asm.rs[i], asm.rule.w
    A = asm.diff(u) / rs
    B = asm.diff(v) / rs
    lhs = asm.sum(w * (k.phi(A) - k.phi(B)) * (A - B))
    rhs = 4.0 * asm.sum(w * k.Phi(np.abs(A - B) / 2.0))
    return lhs, rhs


def clarkson_gap(u: DiscreteFunction, v: DiscreteFunction, setup: AnisotropicSetup, i: int,
                 qc: QuadratureConfig | None = None):
    """``(lhs, rhs)`` of ``(1/2)[int Phi(|A|) + int Phi(|B|)] >= int Phi(|A+B|/2) + int Phi(|A-B|/2)``."""
    _check_mesh(u, setup)
    _check_mesh(v, setup)
    asm = _assembler(setup, qc)
    k, rs, w = asm.kernels[i], asm.rs[i], asm.rule.w
    A = asm.diff(u) / rs
    B = asm.diff(v) / rs
    lhs = 0.5 * (asm.sum(w * k.Phi(np.abs(A))) + asm.sum(w * k.Phi(np.abs(B))))
    rhs = asm.sum(w * k.Phi(np.abs(A + B) / 2.0)) + asm.sum(w * k.Phi(np.abs(A - B) / 2.0))
    return lhs, rhs


def pair_rule(setup: AnisotropicSetup, qc: QuadratureConfig | None = None):
    """The cached pair rule (points, weights and difference operator)."""
    return _assembler(setup, qc).rule
