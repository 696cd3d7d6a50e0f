"""Box meshes, P1 functions with zero extension, and modulars/norms on the domain."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from ._numerics import gauss01, line_rule, luxemburg_bisection, reduce_sum, triangle_rule
from .errors import DomainError, SetupError
from .musielak_core import MusielakFamily, conjugate_Phi

__all__ = [
    "Mesh",
    "DiscreteFunction",
    "VariableExponentField",
    "OmegaRule",
    "omega_rule",
    "reaction_rule",
    "lebesgue_modular",
    "lebesgue_luxemburg_norm",
    "musielak_modular",
    "musielak_luxemburg_norm",
    "holder_pairing_check",
    "HolderReport",
    "reaction_integral",
    "reaction_load",
    "mass_matrix",
]


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform simplicial mesh of a box in one or two dimensions.

    Squares are split along the (v00, v11) diagonal. Instances hash by
    identity so derived quadrature data can be cached per mesh.
    """

    dim: int
    lower: np.ndarray
    upper: np.ndarray
    cells_per_axis: tuple
    vertices: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray
    gauss_order: int = 3

    @classmethod
    def box(cls, lower, upper, cells, gauss_order: int = 3) -> "Mesh":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        dim = lower.size
        if dim not in (1, 2) or upper.size != dim:
            raise SetupError("only boxes in dimension 1 or 2 are supported")
        if np.any(upper <= lower):
            raise SetupError("box needs upper > lower in every coordinate")
        cells = tuple(int(c) for c in np.broadcast_to(np.atleast_1d(cells), (dim,)))
        if min(cells) < 2:
            raise SetupError("need at least 2 cells per axis")
        if dim == 1:
            n = cells[0]
            verts = np.linspace(lower[0], upper[0], n + 1)[:, None]
            tri = np.stack([np.arange(n), np.arange(1, n + 1)], axis=1)
            bnd = np.zeros(n + 1, bool)
            bnd[[0, n]] = True
        else:
            nx, ny = cells
            xs = np.linspace(lower[0], upper[0], nx + 1)
            ys = np.linspace(lower[1], upper[1], ny + 1)
            X, Y = np.meshgrid(xs, ys, indexing="xy")
            verts = np.column_stack([X.ravel(), Y.ravel()])
            i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
            v00 = (i + (nx + 1) * j).ravel()
            v10, v01 = v00 + 1, v00 + nx + 1
            v11 = v01 + 1
            tri = np.empty((2 * nx * ny, 3), dtype=int)
            tri[0::2] = np.column_stack([v00, v10, v11])
            tri[1::2] = np.column_stack([v00, v11, v01])
            bnd = (
                np.isclose(verts[:, 0], lower[0]) | np.isclose(verts[:, 0], upper[0])
                | np.isclose(verts[:, 1], lower[1]) | np.isclose(verts[:, 1], upper[1])
            )
        return cls(dim, lower, upper, cells, verts, tri, bnd, int(gauss_order))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def n_dofs(self) -> int:
        return int((~self.boundary).sum())

    @property
    def volumes(self) -> np.ndarray:
        v = self.vertices[self.cells]
        if self.dim == 1:
            return v[:, 1, 0] - v[:, 0, 0]
        e1, e2 = v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]
        return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def measure(self) -> float:
        return float(np.prod(self.upper - self.lower))

    @property
    def diam(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def h(self) -> np.ndarray:
        return (self.upper - self.lower) / np.asarray(self.cells_per_axis)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    def refine(self) -> "Mesh":
        return Mesh.box(self.lower, self.upper, tuple(2 * c for c in self.cells_per_axis), self.gauss_order)

    def locate(self, points: np.ndarray):
        """Cell index and barycentric coordinates of points; -1 outside the box."""
        pts = np.asarray(points, dtype=float).reshape(-1, self.dim)
        inside = np.all((pts >= self.lower - 1e-14) & (pts <= self.upper + 1e-14), axis=1)
        rel = (pts - self.lower) / self.h
        idx = np.clip(np.floor(rel).astype(int), 0, np.asarray(self.cells_per_axis) - 1)
        loc = rel - idx
        if self.dim == 1:
            cell = idx[:, 0]
            bary = np.column_stack([1 - loc[:, 0], loc[:, 0]])
        else:
            nx = self.cells_per_axis[0]
            sq = idx[:, 0] + nx * idx[:, 1]
            lower_tri = loc[:, 0] >= loc[:, 1]
            cell = 2 * sq + (~lower_tri)
            xi, eta = loc[:, 0], loc[:, 1]
            # (v00, v10, v11): 1-xi, xi-eta, eta ; (v00, v11, v01): 1-eta, xi, eta-xi
            bary = np.where(
                lower_tri[:, None],
                np.column_stack([1 - xi, xi - eta, eta]),
                np.column_stack([1 - eta, xi, eta - xi]),
            )
        cell = np.where(inside, cell, -1)
        return cell, bary


@dataclass(frozen=True, eq=False)
class DiscreteFunction:
    """Continuous piecewise-linear function vanishing on the boundary and outside."""

    mesh: Mesh
    coefficients: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coefficients, dtype=float).copy()
        if c.shape != (self.mesh.n_vertices,):
            raise DomainError(f"expected {self.mesh.n_vertices} vertex coefficients, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise DomainError("coefficients must be finite")
        if np.any(c[self.mesh.boundary] != 0.0):
            raise DomainError("boundary coefficients must be zero")
        c.setflags(write=False)
        object.__setattr__(self, "coefficients", c)

    @classmethod
    def from_interior(cls, mesh: Mesh, values) -> "DiscreteFunction":
        c = np.zeros(mesh.n_vertices)
        c[mesh.interior] = values
        return cls(mesh, c)

    @classmethod
    def interpolate(cls, mesh: Mesh, f: Callable) -> "DiscreteFunction":
        """P1 interpolant of ``f`` with boundary values replaced by zero."""
        c = np.asarray(f(mesh.vertices), dtype=float).reshape(-1).copy()
        c[mesh.boundary] = 0.0
        return cls(mesh, c)

    @classmethod
    def zero(cls, mesh: Mesh) -> "DiscreteFunction":
        return cls(mesh, np.zeros(mesh.n_vertices))

    @classmethod
    def random(cls, mesh: Mesh, rng: np.random.Generator) -> "DiscreteFunction":
        """Interior coefficients i.i.d. uniform in [-1, 1]."""
        return cls.from_interior(mesh, rng.uniform(-1.0, 1.0, mesh.n_dofs))

    @classmethod
    def bump(cls, mesh: Mesh) -> "DiscreteFunction":
        """Interpolant of ``prod_j sin(pi xi_j)`` with ``xi`` the box-normalised coordinates."""
        def f(x):
            xi = (x - mesh.lower) / (mesh.upper - mesh.lower)
            return np.prod(np.sin(np.pi * xi), axis=1)
        return cls.interpolate(mesh, f)

    @classmethod
    def hat(cls, mesh: Mesh, dof: int) -> "DiscreteFunction":
        v = np.zeros(mesh.n_dofs)
        v[dof] = 1.0
        return cls.from_interior(mesh, v)

    @property
    def interior_values(self) -> np.ndarray:
        return self.coefficients[self.mesh.interior]

    def is_zero(self) -> bool:
        return not np.any(self.coefficients)

    def __call__(self, points) -> np.ndarray:
        cell, bary = self.mesh.locate(points)
        vals = np.einsum("ij,ij->i", bary, self.coefficients[self.mesh.cells[np.maximum(cell, 0)]])
        return np.where(cell >= 0, vals, 0.0)

    def gradients(self) -> np.ndarray:
        """Cellwise constant gradients, shape ``(n_cells, dim)``."""
        m = self.mesh
        v = m.vertices[m.cells]
        c = self.coefficients[m.cells]
        if m.dim == 1:
            return ((c[:, 1] - c[:, 0]) / (v[:, 1, 0] - v[:, 0, 0]))[:, None]
        e = v[:, 1:] - v[:, :1]
        dc = c[:, 1:] - c[:, :1]
        return np.linalg.solve(e, dc[..., None])[..., 0]

    def lipschitz_constant(self) -> float:
        return float(np.max(np.linalg.norm(self.gradients(), axis=1)))

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.coefficients)))

    def scaled(self, alpha: float) -> "DiscreteFunction":
        return DiscreteFunction(self.mesh, alpha * self.coefficients)

    def __add__(self, other):
        return DiscreteFunction(self.mesh, self.coefficients + other.coefficients)

    def __sub__(self, other):
        return DiscreteFunction(self.mesh, self.coefficients - other.coefficients)

    def __neg__(self):
        return self.scaled(-1.0)

    def __mul__(self, alpha):
        return self.scaled(float(alpha))

    __rmul__ = __mul__


class VariableExponentField:
    """Continuous exponent ``q`` on the closed box with ``1 < q_minus <= q <= q_plus``."""

    def __init__(self, q: Callable, q_minus: float, q_plus: float, kind: str = "custom", params: dict | None = None):
        q_minus, q_plus = float(q_minus), float(q_plus)
        if not 1.0 < q_minus <= q_plus < math.inf:
            raise SetupError(f"exponent bounds need 1 < q- <= q+ < inf (got {q_minus:g}, {q_plus:g})")
        self._q = q
        self.q_minus = q_minus
        self.q_plus = q_plus
        self.kind = kind
        self.params = params or {}

    @classmethod
    def constant(cls, q: float):
        q = float(q)
        return cls(lambda x: np.full(len(np.atleast_2d(x)), q), q, q, "constant", {"q": q})

    @classmethod
    def affine(cls, q0: float, q1: float, lower, upper):
        """``q0 + (q1 - q0) xi(x)`` with ``xi`` the mean normalised coordinate."""
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))

        def q(x):
            xi = np.clip((np.atleast_2d(x) - lower) / (upper - lower), 0.0, 1.0).mean(axis=1)
            return q0 + (q1 - q0) * xi

        return cls(q, min(q0, q1), max(q0, q1), "affine", {"q0": float(q0), "q1": float(q1)})

    @classmethod
    def nodal(cls, mesh: Mesh, values):
        """P1 interpolation of vertex values (a table on the nodes)."""
        values = np.asarray(values, dtype=float)
        f = DiscreteFunction.__new__(DiscreteFunction)
        object.__setattr__(f, "mesh", mesh)
        object.__setattr__(f, "coefficients", values)

        def q(x):
            return DiscreteFunction.__call__(f, x)

        return cls(q, float(values.min()), float(values.max()), "nodal", {"values": values.tolist()})

    def __call__(self, x) -> np.ndarray:
        return np.asarray(self._q(x), dtype=float)

    def is_constant(self) -> bool:
        return self.q_minus == self.q_plus

    def validate(self, points) -> None:
        vals = self(points)
        if np.any(vals < self.q_minus - 1e-12) or np.any(vals > self.q_plus + 1e-12):
            raise SetupError("exponent field leaves its declared range [q-, q+]")

    def describe(self) -> dict:
        return {"kind": self.kind, "q_minus": self.q_minus, "q_plus": self.q_plus, **self.params}


@dataclass(frozen=True)
class OmegaRule:
    points: np.ndarray
    weights: np.ndarray
    bary: np.ndarray
    vertex_ids: np.ndarray
    values: np.ndarray


def _split_pieces_1d(c):
    # two sub-intervals per cell, split at the zero of u when it changes sign
    u0, u1 = c[:, 0], c[:, 1]
    cross = u0 * u1 < 0
    z = np.where(cross, u0 / np.where(cross, u0 - u1, 1.0), 0.5)
    a = np.zeros_like(z)
    b = np.ones_like(z)
    starts = np.stack([a, z], axis=1)
    ends = np.stack([z, b], axis=1)
    return starts, ends


# grading toward zeros of u: w = t**_GRADE_POWER with a _GRADE_ORDER-point Gauss rule in t
_GRADE_POWER = 3
_GRADE_ORDER = 10
_GRADE_RATIO = 0.25


@lru_cache(maxsize=None)
def _graded_refs(dim: int, k: int = _GRADE_POWER):
    """Reference rules (barycentrics over piece corners, unit-sum weights) near zeros of ``u``.

    In 1D corner 0 is the zero. In 2D ``vertex`` has the zero at corner 0 and
    ``edge`` the zero along the edge opposite corner 0 (collapsed coordinates).
    With ``|u| ~ w`` the integrand ``w**p`` becomes ``t**(3p + 2)``, smooth
    enough for the Gauss rule, and integer ``p <= 4`` stays exact. ``k = 1``
    gives the ungraded collapsed rule.
    """
    t, tw = gauss01(_GRADE_ORDER)
    w, dw = t**k, k * t ** (k - 1) * tw
    if dim == 1:
        return {"vertex": (np.stack([1 - w, w], axis=1), dw)}
    v, vw = gauss01(_GRADE_ORDER)
    W, V = np.meshgrid(w, v, indexing="ij")
    DW, VW = np.meshgrid(dw, vw, indexing="ij")
    W, V, base = W.ravel(), V.ravel(), (DW * VW).ravel()
    vertex = (np.stack([1 - W, W * (1 - V), W * V], axis=1), 2 * W * base)
    edge = (np.stack([W, (1 - W) * (1 - V), (1 - W) * V], axis=1), 2 * (1 - W) * base)
    return {"vertex": vertex, "edge": edge}


def _pieces(coef, dim, split):
    # pieces as corner barycentrics over the parent cell: (cells, pieces, corners, dim + 1)
    n = len(coef)
    if dim == 1:
        if not split:
            return np.broadcast_to(np.eye(2), (n, 1, 2, 2))
        s, e = _split_pieces_1d(coef)
        corners = np.stack([s, e], axis=2)
        return np.stack([1 - corners, corners], axis=-1)
    if not split:
        return np.broadcast_to(np.eye(3), (n, 1, 3, 3))
    return _split_pieces_2d(coef)


def _rule_on_pieces(cell, corners, frac, ref, refw, vol):
    bary = np.einsum("qk,pkj->pqj", ref, corners)
    w = (vol[cell] * frac)[:, None] * refw[None, :]
    return np.repeat(cell, len(refw)), bary.reshape(-1, corners.shape[-1]), w.ravel()


def omega_rule(u: DiscreteFunction, order: int | None = None, split: bool = True) -> OmegaRule:
    """Quadrature on the domain adapted to ``u``.

    With ``split`` every cell is cut along the zero set of ``u`` (where it
    changes sign) so that ``|u|`` is smooth on each piece, and pieces on
    which ``u`` vanishes at a corner or along an edge use a rule graded
    toward the zero, so ``|u|^p`` is integrated accurately for non-integer
    ``p``. Without ``split`` the rule is the plain per-cell rule and does not
    depend on ``u``.
    """
    m = u.mesh
    order = m.gauss_order if order is None else order
    coef = u.coefficients[m.cells]
    vol = m.volumes
    dim = m.dim
    pieces = _pieces(coef, dim, split)
    n_cells, n_pieces = pieces.shape[:2]
    if dim == 1:
        ref, refw = line_rule(max(order, _GRADE_ORDER) if split else order)
        ref = np.stack([1 - ref, ref], axis=1)
        frac = np.abs(pieces[:, :, 1, 1] - pieces[:, :, 0, 1])
    elif split:
        ref, refw = _graded_refs(2, 1)["vertex"]
        frac = _piece_area_fraction(pieces)
    else:
        ref, refw = triangle_rule(order)
        frac = _piece_area_fraction(pieces)
    cell = np.repeat(np.arange(n_cells), n_pieces)
    corners = pieces.reshape(n_cells * n_pieces, dim + 1, dim + 1)
    frac = frac.ravel()
    kind = np.zeros(len(cell), dtype=int)
    if split:
        cv = np.abs(np.einsum("pkj,pj->pk", corners, coef[cell]))
        # corners where |u| is zero or small relative to the piece attract the grading
        zero = cv <= _GRADE_RATIO * cv.max(axis=1)[:, None]
        nz = zero.sum(axis=1)
        # 1: graded toward a vertex, 2: toward an edge (2D only); u = 0 keeps the plain rule
        kind = np.where(nz == 1, 1, 0) if dim == 1 else np.where(nz == 1, 1, np.where(nz == 2, 2, 0))
        first = np.where(kind == 1, np.argmax(zero, axis=1), np.argmax(~zero, axis=1))
        rot = (first[:, None] + np.arange(dim + 1)[None, :]) % (dim + 1)
        corners = np.take_along_axis(corners, rot[:, :, None], axis=1)
    parts = [_rule_on_pieces(cell[kind == 0], corners[kind == 0], frac[kind == 0], ref, refw, vol)]
    refs = _graded_refs(dim)
    for code, name in ((1, "vertex"), (2, "edge")):
        sel = kind == code
        if np.any(sel):
            parts.append(_rule_on_pieces(cell[sel], corners[sel], frac[sel], *refs[name], vol))
    cid = np.concatenate([p[0] for p in parts])
    bary = np.concatenate([p[1] for p in parts])
    w = np.concatenate([p[2] for p in parts])
    pts = np.einsum("qj,qjd->qd", bary, m.vertices[m.cells[cid]])
    vals = np.einsum("qj,qj->q", bary, coef[cid])
    return OmegaRule(pts, w, bary, m.cells[cid], vals)


def _split_pieces_2d(c):
    n = len(c)
    neg = c < 0
    n_neg = neg.sum(axis=1)
    cross = (n_neg == 1) | (n_neg == 2)
    # the lonely vertex has the sign shared by no other vertex
    lonely_neg = np.where(n_neg == 1, 1, 0)
    is_lonely = np.where(cross[:, None], neg == lonely_neg[:, None].astype(bool), False)
    lone = np.where(cross, np.argmax(is_lonely, axis=1), 0)
    o1, o2 = (lone + 1) % 3, (lone + 2) % 3
    rows = np.arange(n)
    ul, u1, u2 = c[rows, lone], c[rows, o1], c[rows, o2]
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = np.where(cross, ul / (ul - u1), 0.5)
        t2 = np.where(cross, ul / (ul - u2), 0.5)
    E = np.eye(3)
    L, O1, O2 = E[lone], E[o1], E[o2]
    p1 = L + t1[:, None] * (O1 - L)
    p2 = L + t2[:, None] * (O2 - L)
    pieces = np.stack([
        np.stack([L, p1, p2], axis=1),
        np.stack([p1, O1, O2], axis=1),
        np.stack([p1, O2, p2], axis=1),
    ], axis=1)
    return pieces


def _piece_area_fraction(sub):
    # area of a sub-triangle relative to its parent = |det| of corner barycentrics
    return np.abs(np.linalg.det(sub))


def _modular_from_rule(rule: OmegaRule, Phi_of_abs: Callable, summation: str) -> float:
    return reduce_sum(rule.weights * Phi_of_abs(np.abs(rule.values)), summation)


def lebesgue_modular(u: DiscreteFunction, q: VariableExponentField, summation: str = "compensated") -> float:
    """``int |u(x)|^q(x) dx``."""
    if u.is_zero():
        return 0.0
    rule = omega_rule(u)
    qv = q(rule.points)
    return _modular_from_rule(rule, lambda a: a**qv, summation)


def lebesgue_luxemburg_norm(u: DiscreteFunction, q: VariableExponentField, rtol: float = 1e-10) -> float:
    """``inf{lam > 0 : int |u/lam|^q(x) dx <= 1}``."""
    if u.is_zero():
        return 0.0
    rule = omega_rule(u)
    qv = q(rule.points)
    a = np.abs(rule.values)
    return luxemburg_bisection(lambda lam: reduce_sum(rule.weights * (a / lam) ** qv), rtol=rtol)


def musielak_modular(u: DiscreteFunction, family: MusielakFamily, summation: str = "compensated") -> float:
    """``int Phi_hat_x(|u(x)|) dx``."""
    if u.is_zero():
        return 0.0
    rule = omega_rule(u)
    k = family.bind(rule.points, rule.points)
    return _modular_from_rule(rule, k.Phi, summation)


def musielak_luxemburg_norm(u: DiscreteFunction, family: MusielakFamily, rtol: float = 1e-10) -> float:
    """Luxemburg norm of ``u`` for the modular ``int Phi_hat_x(|u|) dx``."""
    if u.is_zero():
        return 0.0
    rule = omega_rule(u)
    k = family.bind(rule.points, rule.points)
    a = np.abs(rule.values)
    return luxemburg_bisection(lambda lam: reduce_sum(rule.weights * k.Phi(a / lam)), rtol=rtol)


def _conjugate_norm(u: DiscreteFunction, family: MusielakFamily, rtol: float = 1e-10) -> float:
    if u.is_zero():
        return 0.0
    rule = omega_rule(u)
    a = np.abs(rule.values)
    X = rule.points

    def mod(lam):
        return reduce_sum(rule.weights * conjugate_Phi(family, X, X, a / lam, method="young"))

    return luxemburg_bisection(mod, rtol=rtol)


@dataclass
class HolderReport:
    lhs: float
    rhs: float
    norm_u: float
    conjugate_norm_v: float
    passed: bool
    slack: float = 1e-9

    def as_dict(self):
        return dict(self.__dict__)


def holder_pairing_check(u: DiscreteFunction, v: DiscreteFunction, family: MusielakFamily,
                         slack: float = 1e-9) -> HolderReport:
    """Compare ``|int u v|`` with ``2 ||u||_Phi_hat ||v||_conj``."""
    m = u.mesh
    rule = omega_rule(u, order=max(m.gauss_order, 2), split=False)
    vv = np.einsum("ij,ij->i", rule.bary, v.coefficients[rule.vertex_ids])
    lhs = abs(reduce_sum(rule.weights * rule.values * vv))
    nu = musielak_luxemburg_norm(u, family)
    nv = _conjugate_norm(v, family)
    rhs = 2.0 * nu * nv
    return HolderReport(lhs, rhs, nu, nv, bool(lhs <= rhs + slack * max(1.0, rhs)), slack)


def reaction_rule(u: DiscreteFunction) -> OmegaRule:
    """Fixed (u-independent) rule for the reaction terms.

    ``|u|^q / q`` is C1 across the zero set, and a rule that does not move with
    ``u`` keeps the load and Hessian the exact derivatives of the discrete sum.
    """
    return omega_rule(u, order=max(u.mesh.gauss_order, 4), split=False)


def reaction_integral(u: DiscreteFunction, q: VariableExponentField, summation: str = "compensated") -> float:
    """``int |u|^q(x) / q(x) dx``."""
    if u.is_zero():
        return 0.0
    rule = reaction_rule(u)
    qv = q(rule.points)
    return reduce_sum(rule.weights * np.abs(rule.values) ** qv / qv, summation)


def reaction_load(u: DiscreteFunction, q: VariableExponentField) -> np.ndarray:
    """Vector ``[int |u|^(q-2) u e_k dx]_k`` over interior vertices."""
    m = u.mesh
    rule = reaction_rule(u)
    qv = q(rule.points)
    val = np.sign(rule.values) * np.abs(rule.values) ** (qv - 1.0)
    contrib = (rule.weights * val)[:, None] * rule.bary
    full = np.bincount(rule.vertex_ids.ravel(), weights=contrib.ravel(), minlength=m.n_vertices)
    return full[m.interior]


def mass_matrix(mesh: Mesh) -> np.ndarray:
    """Dense P1 mass matrix on the interior vertices."""
    verts_per = mesh.dim + 1
    if mesh.dim == 1:
        local = np.array([[2.0, 1.0], [1.0, 2.0]]) / 6.0
    else:
        local = (np.ones((3, 3)) + np.eye(3)) / 12.0
    M = np.zeros((mesh.n_vertices, mesh.n_vertices))
    vol = mesh.volumes
    for a in range(verts_per):
        for b in range(verts_per):
            np.add.at(M, (mesh.cells[:, a], mesh.cells[:, b]), vol * local[a, b])
    idx = mesh.interior
    return M[np.ix_(idx, idx)]
