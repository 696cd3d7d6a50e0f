"""Musielak function families and sampled certification of their hypotheses.

A family is described by a kernel ``a(x, y, t) >= 0`` from which

    phi(x, y, t) = a(x, y, |t|) t,      Phi(x, y, t) = int_0^t phi(x, y, s) ds

are derived. Points are numpy arrays: a 1D array is a single point and a
2D array of shape ``(m, dim)`` is a batch that broadcasts against ``t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import hyp2f1

from ._numerics import halton, monotone_inverse
from .errors import CertificationError, DomainError, QuadratureError, SetupError

__all__ = [
    "GrowthIndices",
    "MusielakFamily",
    "ConstantPower",
    "VariableExponent",
    "LogPerturbed",
    "Custom",
    "SampleGrid",
    "HypothesisReport",
    "Lemma22Bounds",
    "phi",
    "Phi",
    "Phi_hat",
    "Phi_inverse",
    "conjugate_phi",
    "conjugate_Phi",
    "estimate_indices",
    "certify_hypotheses",
    "lemma22_bounds",
    "integrability_diagnostic",
    "sobolev_conjugate_inverse",
    "default_grid",
]


@dataclass(frozen=True)
class GrowthIndices:
    """Bounds ``lower <= t phi / Phi <= upper`` with ``1 < lower``."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, up = float(self.lower), float(self.upper)
        if not (math.isfinite(lo) and math.isfinite(up)):
            raise SetupError("growth indices must be finite")
        if not lo > 1.0:
            raise SetupError(f"growth index violates 1 < φ⁻ (got φ⁻ = {lo:g})")
        if lo > up:
            raise SetupError(f"growth indices need phi^- <= phi^+ (got {lo:g} > {up:g})")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)

    def contains(self, lo: float, up: float, slack: float = 1e-9) -> bool:
        return lo >= self.lower * (1 - slack) and up <= self.upper * (1 + slack)


def _as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    return x


def _pair_arrays(x, y, t):
    """Broadcast point batches and t to common leading length."""
    x, y = _as_points(x), _as_points(y)
    t = np.asarray(t, dtype=float)
    if x.ndim == 1 and y.ndim == 1:
        return x[None, :], y[None, :], t, True
    if x.ndim == 1:
        x = np.broadcast_to(x, y.shape)
    if y.ndim == 1:
        y = np.broadcast_to(y, x.shape)
    return x, y, t, False


class BoundKernel:
    """A family evaluated at fixed point pairs; methods act on ``t`` arrays."""

    def __init__(self, family: "MusielakFamily", x: np.ndarray, y: np.ndarray):
        self.family = family
        self.x = x
        self.y = y

    @property
    def degree(self):
        """Per-pair homogeneity degree of ``Phi`` in ``t``, or None."""
        return self.family.homogeneity

    def Phi(self, t):
        return self.family._Phi(self.x, self.y, t)

    def phi(self, t):
        return self.family._phi(self.x, self.y, t)

    def dphi(self, t):
        return self.family._dphi(self.x, self.y, t)

    def slice(self, a: int, b: int) -> "BoundKernel":
        """The kernel restricted to pairs ``a:b`` (whole set when bound to one pair)."""
        if self.x.shape[0] == 1:
            return self
        return self.family.bind(self.x[a:b], self.y[a:b])


class MusielakFamily:
    """Base class. Subclasses implement the vectorised ``_Phi``, ``_phi``, ``_dphi``.

    The private methods receive point batches ``x``, ``y`` of shape
    ``(m, dim)`` (or ``(1, dim)``) and ``t >= 0`` broadcastable to ``(m,)``.
    """

    kind = "Custom"
    # degree k when Phi(x, y, c t) = c^k Phi(x, y, t) exactly, else None
    homogeneity = None

    def __init__(self, indices: GrowthIndices):
        self.declared_indices = indices

    # -- kernel interface -------------------------------------------------
    def kernel(self, x, y, t):
        """The value ``a(x, y, t)`` for ``t > 0``."""
        x, y, t, single = _pair_arrays(x, y, t)
        t = np.abs(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self._phi(x, y, t) / t
        return out[0] if single and np.ndim(out) else out

    def bind(self, x, y) -> BoundKernel:
        x, y, _, _ = _pair_arrays(x, y, 0.0)
        return BoundKernel(self, np.ascontiguousarray(x), np.ascontiguousarray(y))

    def sup_Phi_one(self) -> float:
        """An upper bound for ``sup Phi(x, y, 1)`` over the closed domain."""
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "indices": [self.declared_indices.lower, self.declared_indices.upper]}

    # -- implemented by subclasses ----------------------------------------
    def _phi(self, x, y, t):
        raise NotImplementedError

    def _Phi(self, x, y, t):
        raise NotImplementedError

    def _dphi(self, x, y, t):
        t = np.asarray(t, dtype=float)
        h = 1e-6 * np.maximum(t, 1e-8)
        return (self._phi(x, y, t + h) - self._phi(x, y, np.maximum(t - h, 0.0))) / (
            h + np.minimum(h, t)
        )

    def _phi_inverse(self, x, y, v):
        """Inverse of t -> phi(x, y, t) on [0, inf)."""
        v = np.asarray(v, dtype=float)
        shape = np.broadcast_shapes(v.shape, (x.shape[0],) if x.shape[0] > 1 else ())
        flat = np.broadcast_to(v, shape).ravel()
        xs = np.broadcast_to(x, (flat.size, x.shape[-1])) if x.shape[0] > 1 else x
        ys = np.broadcast_to(y, (flat.size, y.shape[-1])) if y.shape[0] > 1 else y

        def f(t, mask):
            if xs.shape[0] > 1:
                return self._phi(xs[mask], ys[mask], t)
            return self._phi(xs, ys, t)

        return monotone_inverse(f, flat).reshape(shape)

    def _conjugate_Phi_closed(self, x, y, t):
        return None

    @property
    def sqrt_convex(self) -> bool | None:
        """Whether t -> Phi(sqrt t) is known to be convex (None when unknown)."""
        return None


class ConstantPower(MusielakFamily):
    """``a(t) = t^(p-2)``, so ``Phi(t) = t^p / p`` with indices ``(p, p)``."""

    kind = "ConstantPower"

    def __init__(self, p: float):
        p = float(p)
        super().__init__(GrowthIndices(p, p))
        self.p = p
        self.homogeneity = p

    def __repr__(self):
        return f"ConstantPower(p={self.p:g})"

    def describe(self):
        return {"kind": self.kind, "p": self.p}

    def _phi(self, x, y, t):
        t = np.asarray(t, dtype=float)
        if self.p == 2.0:
            return t * 1.0
        return np.sign(t) * np.abs(t) ** (self.p - 1.0)

    def _Phi(self, x, y, t):
        t = np.asarray(t, dtype=float)
        if self.p == 2.0:
            return 0.5 * t * t
        return t**self.p / self.p

    def _dphi(self, x, y, t):
        t = np.abs(np.asarray(t, dtype=float))
        if self.p == 2.0:
            return np.ones_like(t)
        with np.errstate(divide="ignore"):
            return (self.p - 1.0) * t ** (self.p - 2.0)

    def _phi_inverse(self, x, y, v):
        return np.asarray(v, dtype=float) ** (1.0 / (self.p - 1.0))

    def _conjugate_Phi_closed(self, x, y, t):
        q = self.p / (self.p - 1.0)
        return np.asarray(t, dtype=float) ** q / q

    def sup_Phi_one(self):
        return 1.0 / self.p

    @property
    def sqrt_convex(self):
        return self.p >= 2.0


class VariableExponent(MusielakFamily):
    """``a(x, y, t) = t^(p(x, y) - 2)`` with a continuous symmetric exponent.

    ``p`` maps point batches ``(m, dim), (m, dim)`` to ``(m,)`` and must take
    values in ``[p_lower, p_upper]`` on the closed domain; those bounds are
    the declared growth indices.
    """

    kind = "VariableExponent"

    def __init__(self, p: Callable, p_lower: float, p_upper: float, label: str = "custom"):
        super().__init__(GrowthIndices(p_lower, p_upper))
        self.p = p
        self.label = label
        self._params = None

    @classmethod
    def affine(cls, p_min: float, p_max: float, lower, upper):
        """Exponent ``p_min + (p_max - p_min) (xi(x) + xi(y)) / 2``.

        ``xi`` is the mean of the coordinates rescaled to [0, 1] on the box
        ``[lower, upper]`` and clamped to it, so the exponent stays in
        ``[p_min, p_max]`` even for exterior points.
        """
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        span = upper - lower

        def xi(z):
            return np.clip((z - lower) / span, 0.0, 1.0).mean(axis=-1)

        def p(x, y):
            return p_min + (p_max - p_min) * 0.5 * (xi(x) + xi(y))

        fam = cls(p, p_min, p_max, label="affine")
        fam._params = {"p_min": float(p_min), "p_max": float(p_max), "lower": lower.tolist(), "upper": upper.tolist()}
        return fam

    def __repr__(self):
        lo, up = self.declared_indices.lower, self.declared_indices.upper
        return f"VariableExponent({self.label}, p in [{lo:g}, {up:g}])"

    def describe(self):
        d = {"kind": self.kind, "label": self.label,
             "p_min": self.declared_indices.lower, "p_max": self.declared_indices.upper}
        if self._params:
            d.update(self._params)
        return d

    def exponent(self, x, y):
        x, y, _, single = _pair_arrays(x, y, 0.0)
        p = np.asarray(self.p(x, y), dtype=float)
        return p[0] if single else p

    def bind(self, x, y):
        bound = super().bind(x, y)
        p = np.asarray(self.p(bound.x, bound.y), dtype=float)
        return _BoundPower(self, bound.x, bound.y, p)

    def _pvals(self, x, y):
        return np.asarray(self.p(x, y), dtype=float)

    def _phi(self, x, y, t):
        p = self._pvals(x, y)
        t = np.asarray(t, dtype=float)
        return np.sign(t) * np.abs(t) ** (p - 1.0)

    def _Phi(self, x, y, t):
        p = self._pvals(x, y)
        return np.asarray(t, dtype=float) ** p / p

    def _dphi(self, x, y, t):
        p = self._pvals(x, y)
        with np.errstate(divide="ignore"):
            return (p - 1.0) * np.abs(np.asarray(t, dtype=float)) ** (p - 2.0)

    def _phi_inverse(self, x, y, v):
        p = self._pvals(x, y)
        return np.asarray(v, dtype=float) ** (1.0 / (p - 1.0))

    def _conjugate_Phi_closed(self, x, y, t):
        p = self._pvals(x, y)
        q = p / (p - 1.0)
        return np.asarray(t, dtype=float) ** q / q

    def sup_Phi_one(self):
        return 1.0 / self.declared_indices.lower

    @property
    def sqrt_convex(self):
        return self.declared_indices.lower >= 2.0


class _BoundPower(BoundKernel):
    def __init__(self, family, x, y, p):
        super().__init__(family, x, y)
        self.p = p
        self.pm1 = p - 1.0

    def slice(self, a, b):
        if np.ndim(self.p) == 0 or len(self.p) == 1:
            return self
        return _BoundPower(self.family, self.x[a:b], self.y[a:b], self.p[a:b])

    @property
    def degree(self):
        return self.p

    def Phi(self, t):
        return np.power(t, self.p) / self.p

    def phi(self, t):
        return np.sign(t) * np.power(np.abs(t), self.pm1)

    def dphi(self, t):
        with np.errstate(divide="ignore"):
            return self.pm1 * np.power(np.abs(t), self.pm1 - 1.0)


class LogPerturbed(MusielakFamily):
    """``a(t) = t^(p-2) log(shift + t)`` with ``shift > 1``.

    The ratio ``t phi / Phi`` lies in ``[p, p + 1/log(shift)]``. The primitive
    has the closed form

        Phi(t) = [t^p log(c + t) - c^p z^(p+1)/(p+1) 2F1(1, p+1; p+2; -z)] / p,

    with ``c = shift`` and ``z = t / c``.
    """

    kind = "LogPerturbed"

    def __init__(self, p: float, shift: float = math.e):
        p, shift = float(p), float(shift)
        if not shift > 1.0:
            raise SetupError(f"LogPerturbed needs shift > 1 (got {shift:g})")
        super().__init__(GrowthIndices(p, p + 1.0 / math.log(shift)))
        self.p = p
        self.shift = shift

    def __repr__(self):
        return f"LogPerturbed(p={self.p:g}, shift={self.shift:g})"

    def describe(self):
        return {"kind": self.kind, "p": self.p, "shift": self.shift}

    def _phi(self, x, y, t):
        t = np.asarray(t, dtype=float)
        at = np.abs(t)
        return np.sign(t) * at ** (self.p - 1.0) * np.log(self.shift + at)

    def _Phi(self, x, y, t):
        t = np.asarray(t, dtype=float)
        p, c = self.p, self.shift
        z = t / c
        tail = c**p * z ** (p + 1.0) / (p + 1.0) * hyp2f1(1.0, p + 1.0, p + 2.0, -z)
        return (t**p * np.log(c + t) - tail) / p

    def _dphi(self, x, y, t):
        t = np.abs(np.asarray(t, dtype=float))
        p, c = self.p, self.shift
        with np.errstate(divide="ignore", invalid="ignore"):
            out = (p - 1.0) * t ** (p - 2.0) * np.log(c + t) + t ** (p - 1.0) / (c + t)
        return out

    def sup_Phi_one(self):
        return float(self._Phi(None, None, 1.0))

    @property
    def sqrt_convex(self):
        return self.p >= 2.0


class Custom(MusielakFamily):
    """User kernel ``a(x, y, t)`` with declared indices.

    ``Phi`` is computed by adaptive quadrature of ``phi`` unless a closed
    form ``Phi_closed(x, y, t)`` is supplied. ``sup_one`` bounds
    ``Phi(x, y, 1)`` over the domain (estimated on the default grid when
    omitted).
    """

    kind = "Custom"

    def __init__(self, kernel: Callable, indices: GrowthIndices | tuple, Phi_closed: Callable | None = None,
                 sup_one: float | None = None, name: str = "custom"):
        if not isinstance(indices, GrowthIndices):
            indices = GrowthIndices(*indices)
        super().__init__(indices)
        self._kernel = kernel
        self._Phi_closed = Phi_closed
        self._sup_one = sup_one
        self.name = name

    def __repr__(self):
        return f"Custom({self.name})"

    def describe(self):
        return {"kind": self.kind, "name": self.name,
                "indices": [self.declared_indices.lower, self.declared_indices.upper]}

    def _phi(self, x, y, t):
        t = np.asarray(t, dtype=float)
        at = np.abs(t)
        with np.errstate(invalid="ignore"):
            val = np.asarray(self._kernel(x, y, at), dtype=float) * t
        return np.where(at == 0.0, 0.0, val)

    def _Phi(self, x, y, t):
        if self._Phi_closed is not None:
            return np.asarray(self._Phi_closed(x, y, t), dtype=float)
        t = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(t.shape, (x.shape[0],) if x.shape[0] > 1 else ())
        tb = np.broadcast_to(t, shape).ravel()

        def integrand(u):
            return tb * self._phi(x, y, (tb * u).reshape(shape)).ravel()

        res, err = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-12, epsrel=1e-12, limit=2**10)
        scale = np.maximum(np.abs(res), 1.0)
        if np.any(err > 1e-9 * scale):
            raise QuadratureError("primitive quadrature did not reach tolerance", achieved=float(np.max(err)))
        return res.reshape(shape)

    def sup_Phi_one(self):
        if self._sup_one is not None:
            return float(self._sup_one)
        return None


# ---------------------------------------------------------------------------
# public operations


def _check_t(t, allow_negative=False):
    t = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t)):
        raise DomainError("t must be finite")
    if not allow_negative and np.any(t < 0):
        raise DomainError("t must be nonnegative")
    return t


def _unwrap(out, single):
    out = np.asarray(out, dtype=float)
    if single and out.ndim and out.shape[0] == 1 and out.size == 1:
        return float(out.reshape(()))
    return float(out) if out.ndim == 0 else out


def phi(family: MusielakFamily, x, y, t):
    """``a(x, y, |t|) t``; odd in ``t`` and zero at zero."""
    t = _check_t(t, allow_negative=True)
    x, y, t, single = _pair_arrays(x, y, t)
    return _unwrap(family._phi(x, y, t), single)


def Phi(family: MusielakFamily, x, y, t):
    """Primitive ``int_0^t phi(x, y, s) ds`` for ``t >= 0``."""
    t = _check_t(t)
    x, y, t, single = _pair_arrays(x, y, t)
    return _unwrap(family._Phi(x, y, t), single)


def Phi_hat(family: MusielakFamily, x, t):
    """Diagonal restriction ``Phi(x, x, t)``."""
    return Phi(family, x, x, t)


def Phi_inverse(family: MusielakFamily, x, v, rtol: float = 1e-12):
    """Solve ``Phi_hat(x, t) = v`` for ``t`` by bracketing bisection."""
    v = _check_t(v)
    xp, _, v, single = _pair_arrays(x, x, v)

    if xp.shape[0] > 1:
        def f(t, mask):
            return family._Phi(xp[mask.ravel()], xp[mask.ravel()], t)
    else:
        def f(t, mask):
            return family._Phi(xp, xp, t)

    out = monotone_inverse(f, v, rtol=rtol)
    return _unwrap(out, single)


def conjugate_phi(family: MusielakFamily, x, y, t):
    """Right inverse of ``phi``: ``sup{a : phi(x, y, a) <= t}`` equals ``phi^{-1}(t)``."""
    t = _check_t(t)
    x, y, t, single = _pair_arrays(x, y, t)
    return _unwrap(family._phi_inverse(x, y, t), single)


def conjugate_Phi(family: MusielakFamily, x, y, t, method: str = "quadrature"):
    """Complementary function ``int_0^t phi^{-1}(x, y, s) ds``.

    ``method='quadrature'`` integrates the inverse adaptively (closed forms
    are used for power families); ``method='young'`` uses the equality case
    of Young's inequality, ``t a - Phi(a)`` with ``a = phi^{-1}(t)``.
    """
    t = _check_t(t)
    x, y, t, single = _pair_arrays(x, y, t)
    if method == "young":
        a = family._phi_inverse(x, y, t)
        return _unwrap(t * a - family._Phi(x, y, a), single)
    if method != "quadrature":
        raise DomainError(f"unknown method {method!r}")
    closed = family._conjugate_Phi_closed(x, y, t)
    if closed is not None:
        return _unwrap(closed, single)
    tb = np.atleast_1d(t).astype(float)
    shape = np.broadcast_shapes(tb.shape, (x.shape[0],) if x.shape[0] > 1 else ())
    tb = np.broadcast_to(tb, shape)

    def integrand(u):
        return (tb * family._phi_inverse(x, y, tb * u)).ravel()

    res, err = integrate.quad_vec(integrand, 0.0, 1.0, epsabs=1e-13, epsrel=1e-11, limit=2**10)
    if np.any(err > 1e-8 * np.maximum(np.abs(res), 1e-300)):
        raise QuadratureError("conjugate quadrature did not reach tolerance", achieved=float(np.max(err)))
    return _unwrap(res.reshape(shape), single)


@dataclass(frozen=True)
class SampleGrid:
    """Point pairs ``x[j], y[k]`` crossed with values ``t``."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray

    def expand(self):
        """Flattened ``(X, Y, T)`` arrays over the full cross product."""
        nx, ny, nt = len(self.x), len(self.y), len(self.t)
        jx, jy, jt = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nt), indexing="ij")
        return self.x[jx.ravel()], self.y[jy.ravel()], self.t[jt.ravel()]


def default_grid(lower, upper, n_points: int = 64, n_t: int = 64, t_range=(1e-6, 1e6)) -> SampleGrid:
    """Deterministic low-discrepancy grid over a box and log-spaced ``t``."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    dim = lower.size
    h = halton(2 * n_points, dim)
    pts = lower + (upper - lower) * h
    t = np.logspace(math.log10(t_range[0]), math.log10(t_range[1]), n_t)
    return SampleGrid(pts[:n_points], pts[n_points:], t)


def estimate_indices(family: MusielakFamily, grid: SampleGrid, slack: float = 1e-9) -> GrowthIndices:
    """Range of ``t phi / Phi`` on the grid, checked against the declared indices."""
    if len(grid.x) == 0 or len(grid.y) == 0 or len(grid.t) == 0:
        raise DomainError("sample grid is empty")
    if np.any(np.asarray(grid.t) <= 0):
        raise DomainError("sample grid needs t > 0")
    X, Y, T = grid.expand()
    Phi_v = family._Phi(X, Y, T)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = T * family._phi(X, Y, T) / Phi_v
    ok = np.isfinite(ratio) & (Phi_v > 0)
    if not np.all(ok):
        k = int(np.flatnonzero(~ok)[0])
        raise CertificationError("index ratio undefined (Phi underflow?)",
                                 witness={"x": X[k].tolist(), "y": Y[k].tolist(), "t": float(T[k])})
    lo, up = float(ratio.min()), float(ratio.max())
    dec = family.declared_indices
    if not dec.contains(lo, up, slack):
        k = int(np.argmin(ratio)) if lo < dec.lower * (1 - slack) else int(np.argmax(ratio))
        raise CertificationError(
            f"declared indices ({dec.lower:g}, {dec.upper:g}) violated: t phi/Phi = {ratio[k]:.12g}",
            witness={"x": X[k].tolist(), "y": Y[k].tolist(), "t": float(T[k]), "ratio": float(ratio[k])},
        )
    return GrowthIndices(lo, up)


@dataclass
class HypothesisReport:
    sqrt_convex: bool
    bounded_at_one: bool
    delta2: bool
    symmetric: bool
    sup_Phi_one: float
    max_delta2_ratio: float
    delta2_constant: float
    witnesses: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.sqrt_convex and self.bounded_at_one and self.delta2 and self.symmetric

    def as_dict(self):
        return {
            "sqrt_convex": self.sqrt_convex,
            "bounded_at_one": self.bounded_at_one,
            "delta2": self.delta2,
            "symmetric": self.symmetric,
            "sup_Phi_one": self.sup_Phi_one,
            "max_delta2_ratio": self.max_delta2_ratio,
            "delta2_constant": self.delta2_constant,
            "witnesses": self.witnesses,
        }


def certify_hypotheses(family: MusielakFamily, grid: SampleGrid, slack: float = 1e-9) -> HypothesisReport:
    """Sampled checks of square-root convexity, boundedness at 1 and Delta_2."""
    nx, ny = len(grid.x), len(grid.y)
    if nx == 0 or ny == 0 or len(grid.t) == 0:
        raise DomainError("sample grid is empty")
    witnesses = {}
    X = np.repeat(grid.x, ny, axis=0)
    Y = np.tile(grid.y, (nx, 1))
    t = np.sort(np.asarray(grid.t, dtype=float))

    # (a) s -> Phi(sqrt s) convex: slopes of consecutive chords nondecreasing
    s = t * t
    XT, YT = X.repeat(len(t), 0), Y.repeat(len(t), 0)
    F = family._Phi(XT, YT, np.tile(t, nx * ny)).reshape(nx * ny, len(t))
    slopes = np.diff(F, axis=1) / np.diff(s)
    dslope = np.diff(slopes, axis=1)
    scale = np.maximum(np.abs(slopes[:, 1:]), np.abs(slopes[:, :-1]))
    bad = dslope < -slack * scale
    sqrt_convex = not bool(np.any(bad))
    if not sqrt_convex:
        i, j = np.argwhere(bad)[0]
        witnesses["sqrt_convex"] = {"x": X[i].tolist(), "y": Y[i].tolist(), "t": float(t[j + 1])}

    # (b) sup Phi(x, y, 1)
    one = family._Phi(X, Y, np.ones(len(X)))
    sup_one = float(np.max(one))
    bounded = bool(np.isfinite(sup_one))
    if not bounded:
        witnesses["bounded_at_one"] = {"x": X[int(np.argmax(one))].tolist()}

    # (c) Phi(2t) <= 2^phi+ Phi(t)
    F2 = family._Phi(XT, YT, np.tile(2 * t, nx * ny)).reshape(nx * ny, len(t))
    ratio = F2 / F
    const = 2.0**family.declared_indices.upper
    max_ratio = float(np.max(ratio))
    delta2 = max_ratio <= const * (1 + slack)
    if not delta2:
        i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
        witnesses["delta2"] = {"x": X[i].tolist(), "y": Y[i].tolist(), "t": float(t[j]), "ratio": max_ratio}

    # kernel symmetry a(x, y, t) = a(y, x, t)
    F_sw = family._Phi(YT, XT, np.tile(t, nx * ny)).reshape(nx * ny, len(t))
    asym = np.abs(F_sw - F) > 1e-12 * np.maximum(np.abs(F), 1e-300)
    symmetric = not bool(np.any(asym))
    if not symmetric:
        i, j = np.argwhere(asym)[0]
        witnesses["symmetric"] = {"x": X[i].tolist(), "y": Y[i].tolist(), "t": float(t[j])}

    return HypothesisReport(sqrt_convex, bounded, delta2, symmetric, sup_one, max_ratio, const, witnesses)


@dataclass(frozen=True)
class Lemma22Bounds:
    lower: np.ndarray | float
    upper: np.ndarray | float
    value: np.ndarray | float

    def holds(self, slack: float = 1e-9):
        return np.all(self.value >= self.lower * (1 - slack)) and np.all(self.value <= self.upper * (1 + slack))

    def __iter__(self):
        return iter((self.lower, self.upper, self.value))


def lemma22_bounds(family: MusielakFamily, x, y, t, sigma) -> Lemma22Bounds:
    """Power-type bounds on ``Phi(sigma t)`` implied by the growth indices.

    For sigma > 1: ``sigma^phi- Phi(t) <= Phi(sigma t) <= sigma^phi+ Phi(t)``.
    For sigma < 1: ``sigma^phi+ Phi(t) <= Phi(sigma t) <= sigma^phi- Phi(t)``,
    the upper one being ``Phi(t') <= sigma^phi- Phi(t'/sigma)`` at ``t' = sigma t``.
    """
    t = _check_t(t)
    sigma = np.asarray(sigma, dtype=float)
    if np.any(t <= 0) or np.any(sigma <= 0) or not np.all(np.isfinite(sigma)):
        raise DomainError("need t > 0 and sigma > 0")
    if np.any(sigma == 1.0):
        raise DomainError("sigma = 1 carries no statement")
    x, y, t, single = _pair_arrays(x, y, t)
    lo_i, up_i = family.declared_indices.lower, family.declared_indices.upper
    base = family._Phi(x, y, t)
    value = family._Phi(x, y, sigma * t)
    big = sigma > 1.0
    lower = np.where(big, sigma**lo_i, sigma**up_i) * base
    upper = np.where(big, sigma**up_i, sigma**lo_i) * base
    return Lemma22Bounds(_unwrap(lower, single), _unwrap(upper, single), _unwrap(value, single))


@dataclass(frozen=True)
class IntegrabilityReport:
    exponent_at_zero: float
    exponent_at_infinity: float
    threshold: float
    converges_at_zero: bool
    diverges_at_infinity: bool

    def as_dict(self):
        return dict(self.__dict__)


def integrability_diagnostic(family: MusielakFamily, x, s: float, dim: int) -> IntegrabilityReport:
    """Compare the local power of ``Phi_hat^{-1}`` at 0 and infinity with ``s/N``.

    ``int_0^1 Phi_hat^{-1}(tau) tau^{-(N+s)/N} dtau`` is finite iff the
    exponent at zero exceeds ``s/N``; the integral over ``[1, inf)`` diverges
    iff the exponent at infinity is at most ``s/N``.
    """
    if not 0 < s < 1:
        raise DomainError("s must lie in (0, 1)")
    thr = s / dim

    def slope(a, b):
        ia, ib = Phi_inverse(family, x, a), Phi_inverse(family, x, b)
        return math.log(ib / ia) / math.log(b / a)

    e0 = slope(1e-60, 1e-50)
    einf = slope(1e50, 1e60)
    return IntegrabilityReport(e0, einf, thr, e0 > thr + 1e-6, einf <= thr + 1e-6)


def sobolev_conjugate_inverse(family: MusielakFamily, x, s: float, dim: int, t: float) -> float:
    """``int_0^t Phi_hat^{-1}(tau) / tau^((N+s)/N) dtau`` by adaptive quadrature.

    The integral is taken in ``z = log tau`` which turns the endpoint
    singularity at zero into an exponentially decaying tail.
    """
    t = float(_check_t(t))
    if t == 0.0:
        return 0.0
    diag = integrability_diagnostic(family, x, s, dim)
    if not diag.converges_at_zero:
        raise SetupError(
            f"integral diverges at 0: local exponent {diag.exponent_at_zero:.6g} <= s/N = {diag.threshold:.6g}"
        )
    power = 1.0 - (dim + s) / dim

    def f(z):
        tau = math.exp(z)
        return Phi_inverse(family, x, tau) * math.exp(power * z)

    # below z_low the integrand behaves like C exp(rate z); its tail is added in closed form
    rate = diag.exponent_at_zero - diag.threshold
    zt = math.log(t)
    # clamp so that exp(z) and exp(power z) stay representable
    z_low = max(zt - 38.0 / rate, -650.0)
    edges = np.linspace(z_low, zt, int(math.ceil((zt - z_low) / 20.0)) + 1)
    total, err = f(z_low) / rate, 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        val, e = integrate.quad(f, a, b, epsabs=0.0, epsrel=1e-12, limit=200)
        total += val
        err += e
    if err > 1e-8 * max(abs(total), 1e-300):
        raise QuadratureError("Sobolev conjugate quadrature did not converge", achieved=err)
    return total
