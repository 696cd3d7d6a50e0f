"""Regime classification and variational solvers for the Kirchhoff eigenproblem.

Both solvers work on the interior coefficient vector ``c`` of a P1 function
and on the discrete energy ``T_lam``. The residual reported everywhere is
the Euclidean norm of the energy gradient divided by ``sqrt(dim)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import ConvergenceError, DomainError, RegimeError
from .modular_spaces import DiscreteFunction, lebesgue_luxemburg_norm
from .nonlocal_assembly import (
    AnisotropicSetup,
    QuadratureConfig,
    energy,
    energy_gradient,
    energy_hessian,
    fractional_stiffness,
    gagliardo_seminorm,
)

__all__ = [
    "RegimeClassification",
    "EigenSolution",
    "SolverOptions",
    "VerificationReport",
    "classify_regime",
    "lambda_star",
    "embedding_constant",
    "phi_norm",
    "solve_sublinear",
    "solve_mountain_pass",
    "verify_eigen",
]

SUPERLINEAR = "Superlinear"
SUBLINEAR = "Sublinear"
INDETERMINATE = "Indeterminate"


@dataclass(frozen=True)
class RegimeClassification:
    tag: str
    phi_plus_max: float
    phi_minus_min: float
    q_minus: float
    q_plus: float
    theta: float

    def hypotheses(self) -> list[str]:
        """The two regime inequalities with their current values."""
        sup = (f"superlinear: phi+_max < q- * theta and phi+_max < q-  "
               f"({self.phi_plus_max:g} < {self.q_minus * self.theta:g} and {self.phi_plus_max:g} < {self.q_minus:g})")
        sub = f"sublinear: q- < phi-_min  ({self.q_minus:g} < {self.phi_minus_min:g})"
        return [sup, sub]

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class EigenSolution:
    lam: float
    u: DiscreteFunction
    energy: float
    residual: float
    regime: RegimeClassification
    iterations: int
    trace: tuple = ()
    tolerance: float = 1e-6
    converged: bool = True

    def as_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "energy": self.energy,
            "residual": self.residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "tolerance": self.tolerance,
            "regime": self.regime.as_dict(),
            "coefficients": self.u.interior_values.tolist(),
        }


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-6
    max_iter: int = 2000
    path_points: int = 21
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_backtracks: int = 60
    seed_doublings: int = 60
    seed_halvings: int = 30
    stagnation_sweeps: int = 50
    newton_polish: bool = True
    polish_below: float = 1e-2
    rho_ball: float | None = None
    c1: float | None = None
    c1_samples: int = 64
    override_regime: bool = False
    seed: int = 0


def classify_regime(setup: AnisotropicSetup) -> RegimeClassification:
    q = setup.exponent
    theta = float(setup.kirchhoff.theta)
    pp, pm = setup.phi_plus_max, setup.phi_minus_min
    if pp < q.q_minus * theta and pp < q.q_minus:
        tag = SUPERLINEAR
    elif q.q_minus < pm:
        tag = SUBLINEAR
    else:
        tag = INDETERMINATE
    return RegimeClassification(tag, pp, pm, float(q.q_minus), float(q.q_plus), theta)


def lambda_star(setup: AnisotropicSetup, rho: float, c1: float) -> float:
    """``m0 rho^(phi+_max - q-) q- / (2 c1^q- N^(phi+_max - 1))``.

    ``c1`` is the constant of ``||u||_q <= c1 ||u||_Phi``; the ball radius
    must satisfy ``0 < rho < min(1, 1/c1)``.
    """
    reg = classify_regime(setup)
    if reg.tag != SUBLINEAR:
        raise RegimeError(f"lambda_star needs the sublinear regime, got {reg.tag}")
    if not c1 > 0:
        raise DomainError("c1 must be positive")
    if not (0.0 < rho < 1.0 and rho < 1.0 / c1):
        raise DomainError(f"rho must lie in (0, min(1, 1/c1)) = (0, {min(1.0, 1.0 / c1):g}), got {rho:g}")
    m0 = float(setup.kirchhoff.m0)
    pp, qm, N = reg.phi_plus_max, reg.q_minus, setup.N
    return m0 * rho ** (pp - qm) * qm / (2.0 * c1**qm * N ** (pp - 1.0))


def phi_norm(u: DiscreteFunction, setup: AnisotropicSetup, qc: QuadratureConfig | None = None) -> float:
    """``||u||_Phi = sum_i [u]_i``."""
    return math.fsum(gagliardo_seminorm(u, setup, i, qc) for i in range(setup.N))


def _smooth_random(mesh, rng, modes: int = 4) -> DiscreteFunction:
    """Random combination of low sine modes with decaying amplitudes."""
    lo, hi = mesh.lower, mesh.upper
    ks = [np.arange(1, modes + 1)] * mesh.dim
    grids = np.meshgrid(*ks, indexing="ij")
    kk = np.stack([g.ravel() for g in grids], axis=1)
    amp = rng.standard_normal(len(kk)) / np.prod(kk, axis=1) ** 2

    def f(x):
        xi = (x - lo) / (hi - lo)
        out = np.zeros(len(x))
        for a, k in zip(amp, kk):
            out += a * np.prod(np.sin(np.pi * k * xi), axis=1)
        return out

    return DiscreteFunction.interpolate(mesh, f)


def embedding_samples(setup: AnisotropicSetup, samples: int, seed: int = 0):
    """Basis hats followed by ``samples`` random P1 functions.

    Random draws alternate between i.i.d. nodal values and smooth low-mode
    combinations; the sequence for ``samples = n`` is a prefix of the one for
    any larger ``n``.
    """
    mesh = setup.mesh
    out = [DiscreteFunction.hat(mesh, k) for k in range(mesh.n_dofs)]
    out.append(DiscreteFunction.bump(mesh))
    rng = np.random.default_rng(seed)
    for j in range(samples):
        u = DiscreteFunction.random(mesh, rng) if j % 2 == 0 else _smooth_random(mesh, rng)
        out.append(u)
    return out


def embedding_constant(setup: AnisotropicSetup, samples: int = 64, qc: QuadratureConfig | None = None,
                       seed: int = 0, exponent=None) -> float:
    """Largest sampled ratio ``||u||_q / ||u||_Phi``.

    A lower estimate of the best constant ``c1`` in ``||u||_q <= c1 ||u||_Phi``;
    heuristic input to :func:`lambda_star`.
    """
    if samples < 32:
        raise DomainError("embedding_constant needs samples >= 32")
    q = setup.exponent if exponent is None else exponent
    best = 0.0
    for u in embedding_samples(setup, samples, seed):
        if u.is_zero():
            continue
        best = max(best, lebesgue_luxemburg_norm(u, q) / phi_norm(u, setup, qc))
    return best


# ---------------------------------------------------------------------------
# solvers


class _Problem:
    def __init__(self, setup, lam, qc):
        if not lam > 0:
            raise DomainError("lambda must be positive")
        self.setup, self.lam, self.qc = setup, float(lam), qc
        self.mesh = setup.mesh
        self.dim = setup.mesh.n_dofs

    def func(self, c):
        return DiscreteFunction.from_interior(self.mesh, c)

    def f(self, c):
        return energy(self.func(c), self.setup, self.lam, self.qc)

    def g(self, c):
        return energy_gradient(self.func(c), self.setup, self.lam, self.qc)

    def H(self, c):
        return energy_hessian(self.func(c), self.setup, self.lam, self.qc)

    def residual(self, g):
        return float(np.linalg.norm(g) / math.sqrt(self.dim))

    def preconditioner(self):
        """``g -> A^-1 g`` with ``A`` the quadratic fractional stiffness matrix."""
        A = fractional_stiffness(self.setup, self.qc).toarray()
        cho = linalg.cho_factor(A)

        def solve(g):
            return linalg.cho_solve(cho, g)

        solve.A = A
        return solve


def _check_regime(setup, want, opts):
    reg = classify_regime(setup)
    if reg.tag != want and not opts.override_regime:
        raise RegimeError(f"solver needs the {want.lower()} regime, got {reg.tag}: " + "; ".join(reg.hypotheses()))
    return reg


def _seed_direction(setup, initial):
    if initial is None:
        return DiscreteFunction.bump(setup.mesh).interior_values
    if initial.mesh is not setup.mesh:
        raise DomainError("initial function lives on a different mesh")
    if initial.is_zero():
        raise DomainError("initial direction must be nonzero")
    return initial.interior_values


def solve_sublinear(setup: AnisotropicSetup, lam: float, qc: QuadratureConfig | None = None,
                    opts: SolverOptions | None = None, initial: DiscreteFunction | None = None) -> EigenSolution:
    """Negative-energy critical point by descent inside the ball ``||u||_Phi <= rho``.

    The seed is ``t * bump`` with ``t`` halved until the energy is negative.
    Steps are Armijo-backtracked gradient steps (Barzilai-Borwein trial
    length) projected radially onto the ball; once the residual is small a
    Newton direction is tried first. Every accepted step lowers the energy.
    """
    opts = opts or SolverOptions()
    reg = _check_regime(setup, SUBLINEAR, opts)
    prob = _Problem(setup, lam, qc)
    if opts.rho_ball is not None:
        rho = float(opts.rho_ball)
    else:
        c1 = opts.c1 if opts.c1 is not None else embedding_constant(setup, opts.c1_samples, qc)
        rho = 0.9 * min(1.0, 1.0 / c1)

    def norm(c):
        return phi_norm(prob.func(c), setup, qc)

    def project(c):
        n = norm(c)
        return c * (rho / n) if n > rho else c

    base = _seed_direction(setup, initial)
    c = None
    t = 1.0
    for _ in range(opts.seed_halvings):
        t *= 0.5
        trial = project(t * base)
        if prob.f(trial) < 0.0:
            c = trial
            break
    if c is None:
        raise RegimeError(f"no negative-energy seed after {opts.seed_halvings} halvings; "
                          "the data do not look sublinear for this lambda")

    f = prob.f(c)
    g = prob.g(c)
    trace = []
    prev = None
    for it in range(opts.max_iter):
        res = prob.residual(g)
        trace.append((it, f, res))
        if res < opts.tol:
            return EigenSolution(prob.lam, prob.func(c), f, res, reg, it, tuple(trace), opts.tol)
        directions = []
        if opts.newton_polish and res < opts.polish_below:
            try:
                cho = linalg.cho_factor(prob.H(c))
                directions.append((linalg.cho_solve(cho, g), 1.0))
            except linalg.LinAlgError:
                pass
        step0 = opts.initial_step
        if prev is not None:
            s, y = c - prev[0], g - prev[1]
            sy = float(s @ y)
            if sy > 0:
                step0 = float(s @ s) / sy
        directions.append((g, step0))
        accepted = False
        for d, alpha in directions:
            for _ in range(opts.max_backtracks):
                trial = project(c - alpha * d)
                ft = prob.f(trial)
                if ft <= f + opts.armijo_c * float(g @ (trial - c)) and ft < f:
                    accepted = True
                    break
                alpha *= opts.backtrack
            if accepted:
                break
        if not accepted:
            break
        prev = (c, g)
        c, f = trial, ft
        g = prob.g(c)
    res = prob.residual(g)
    trace.append((len(trace), f, res))
    if res < opts.tol:
        return EigenSolution(prob.lam, prob.func(c), f, res, reg, len(trace) - 1, tuple(trace), opts.tol)
    sol = EigenSolution(prob.lam, prob.func(c), f, res, reg, len(trace) - 1, tuple(trace), opts.tol, False)
    raise ConvergenceError(f"descent stopped at residual {res:.3g} (tol {opts.tol:g})", solution=sol)


def _retension(path: np.ndarray, n: int | None = None) -> np.ndarray:
    """Resample a polyline at ``n`` equal-arclength points, keeping the endpoints."""
    n = len(path) if n is None else n
    if len(path) == 1:
        return np.repeat(path, n, axis=0)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    s = np.concatenate([[0.0], np.cumsum(seg)])
    if s[-1] == 0.0:
        return np.repeat(path[:1], n, axis=0)
    target = np.linspace(0.0, s[-1], n)
    out = np.empty((n, path.shape[1]))
    idx = np.clip(np.searchsorted(s, target, side="right") - 1, 0, len(seg) - 1)
    frac = np.where(seg[idx] > 0, (target - s[idx]) / np.where(seg[idx] > 0, seg[idx], 1.0), 0.0)
    out[:] = path[idx] + frac[:, None] * (path[idx + 1] - path[idx])
    out[0], out[-1] = path[0], path[-1]
    return out


def _retension_pinned(path: np.ndarray, k: int) -> np.ndarray:
    """Equal-arclength resampling that keeps point ``k`` in place.

    The interior points are shared between the two sub-paths in proportion
    to their lengths.
    """
    P = len(path)
    seg = np.linalg.norm(np.diff(path, axis=0), axis=1)
    left, right = seg[:k].sum(), seg[k:].sum()
    if left + right == 0.0:
        return path
    n_left = int(round((P - 1) * left / (left + right)))
    n_left = min(max(n_left, 1), P - 2)
    a = _retension(path[: k + 1], n_left + 1)
    b = _retension(path[k:], P - n_left)
    return np.concatenate([a, b[1:]])


def _perp_step(prob, path, j, f, g, precond, opts):
    """Armijo step on point ``j`` along the preconditioned gradient minus its path-tangent part.

    With ``d = A^-1 g`` and the tangent normalised in the ``A`` inner product,
    the projected direction satisfies ``g . d_perp >= 0``.
    """
    c = path[j]
    d = precond(g)
    tau = path[j + 1] - path[j - 1]
    Atau = precond.A @ tau
    nrm = float(tau @ Atau)
    if nrm > 0:
        d = d - (float(tau @ g) / nrm) * tau
    gd = float(g @ d)
    if not gd > 0:
        return c, f
    alpha = opts.initial_step
    for _ in range(opts.max_backtracks):
        trial = c - alpha * d
        ft = prob.f(trial)
        if ft <= f - opts.armijo_c * alpha * gd:
            return trial, ft
        alpha *= opts.backtrack
    return c, f


def _newton_saddle(prob, c, f, res, opts, iters: int = 25):
    """Newton iteration for a nearby nontrivial critical point, or None."""
    n0 = float(np.linalg.norm(c))
    for _ in range(iters):
        try:
            step = linalg.solve(prob.H(c), prob.g(c), assume_a="sym")
        except (linalg.LinAlgError, ValueError):
            return None
        c_new = c - step
        g_new = prob.g(c_new)
        r_new = prob.residual(g_new)
        if not np.isfinite(r_new) or r_new >= res or np.linalg.norm(c_new) < 0.1 * n0:
            return None
        c, res = c_new, r_new
        f = prob.f(c)
        if res < opts.tol:
            return (c, f, res) if f > 0.0 else None
    return None


def solve_mountain_pass(setup: AnisotropicSetup, lam: float, qc: QuadratureConfig | None = None,
                        opts: SolverOptions | None = None, initial: DiscreteFunction | None = None) -> EigenSolution:
    """Mountain-pass critical point with positive energy.

    ``e = t * bump`` is found by doubling ``t`` until ``T(e) < 0``; the segment
    from 0 to ``e`` is discretised into ``path_points`` points. Each sweep
    moves the highest interior point by an Armijo gradient step and resamples
    the path at equal arclength. Close to the saddle a Newton iteration is
    tried and accepted only if it keeps the energy positive.
    """
    opts = opts or SolverOptions()
    reg = _check_regime(setup, SUPERLINEAR, opts)
    prob = _Problem(setup, lam, qc)
    base = _seed_direction(setup, initial)
    e = None
    t = 1.0
    for _ in range(opts.seed_doublings + 1):
        if prob.f(t * base) < 0.0:
            e = t * base
            break
        t *= 2.0
    if e is None:
        raise RegimeError(f"energy stayed nonnegative along t * bump after {opts.seed_doublings} doublings")

    P = max(3, int(opts.path_points))
    path = np.linspace(0.0, 1.0, P)[:, None] * e[None, :]
    E = np.array([0.0] + [prob.f(c) for c in path[1:]])
    precond = prob.preconditioner()
    trace = []
    best, since = math.inf, 0
    newton_after = 0
    closest = None  # (residual, point, energy) of the best maximizer so far
    for sweep in range(opts.max_iter):
        k = 1 + int(np.argmax(E[1:-1]))
        c, f = path[k], E[k]
        g = prob.g(c)
        res = prob.residual(g)
        trace.append((sweep, f, res))
        if res < opts.tol and f > 0.0:
            return EigenSolution(prob.lam, prob.func(c), f, res, reg, sweep, tuple(trace), opts.tol)
        if f > 0.0 and (closest is None or res < closest[0]):
            closest = (res, c.copy(), f)
        if opts.newton_polish and res < opts.polish_below and f > 0.0 and sweep >= newton_after:
            out = _newton_saddle(prob, c.copy(), f, res, opts)
            if out is not None:
                trace.append((sweep + 1, out[1], out[2]))
                return EigenSolution(prob.lam, prob.func(out[0]), out[1], out[2], reg, sweep + 1, tuple(trace),
                                     opts.tol)
            newton_after = sweep + 10
        if f < best - 1e-14 * abs(best):
            best, since = f, 0
        else:
            since += 1
            if since >= opts.stagnation_sweeps:
                out = _newton_saddle(prob, closest[1], closest[2], closest[0], opts) if (
                    opts.newton_polish and closest is not None) else None
                if out is not None:
                    trace.append((sweep + 1, out[1], out[2]))
                    return EigenSolution(prob.lam, prob.func(out[0]), out[1], out[2], reg, sweep + 1,
                                         tuple(trace), opts.tol)
                sol = EigenSolution(prob.lam, prob.func(c), f, res, reg, sweep, tuple(trace), opts.tol, False)
                raise ConvergenceError(f"maximal path energy stagnated for {since} sweeps", solution=sol)
        path[k], E[k] = _perp_step(prob, path, k, f, g, precond, opts)
        path = _retension_pinned(path, k)
        E = np.array([0.0] + [prob.f(p) for p in path[1:]])
    k = 1 + int(np.argmax(E[1:-1]))
    c, f = path[k], E[k]
    res = prob.residual(prob.g(c))
    sol = EigenSolution(prob.lam, prob.func(c), f, res, reg, opts.max_iter, tuple(trace), opts.tol, False)
    raise ConvergenceError(f"no saddle after {opts.max_iter} sweeps (residual {res:.3g})", solution=sol)


# ---------------------------------------------------------------------------
# verification


@dataclass
class VerificationReport:
    max_defect: float
    max_basis_defect: float
    max_random_defect: float
    threshold: float
    passed: bool
    n_tests: int = 0

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def verify_eigen(sol: EigenSolution, setup: AnisotropicSetup, qc: QuadratureConfig | None = None,
                 tol: float | None = None, n_random: int = 16, seed: int = 0) -> VerificationReport:
    """Weak-form defect ``<T'_lam(u), v> / ||v||_Phi`` over all hats and random ``v``."""
    u = sol.u
    if u.is_zero():
        raise DomainError("verify_eigen needs a nonzero eigenfunction")
    tol = sol.tolerance if tol is None else float(tol)
    g = energy_gradient(u, setup, sol.lam, qc)
    mesh = setup.mesh
    basis = 0.0
    for k in range(mesh.n_dofs):
        basis = max(basis, abs(g[k]) / phi_norm(DiscreteFunction.hat(mesh, k), setup, qc))
    rng = np.random.default_rng(seed)
    rand = 0.0
    for _ in range(n_random):
        v = DiscreteFunction.random(mesh, rng)
        rand = max(rand, abs(float(g @ v.interior_values)) / phi_norm(v, setup, qc))
    worst = max(basis, rand)
    thr = 10.0 * tol
    return VerificationReport(worst, basis, rand, thr, worst <= thr, mesh.n_dofs + n_random)
