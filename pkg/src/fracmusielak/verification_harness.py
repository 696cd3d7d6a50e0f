"""Randomized property suites for the inequalities behind the solvers.

Every suite draws its inputs for case ``k`` from ``default_rng([seed, k])``,
so cases are independent of each other and of the worker count, and two
runs with the same seed and setup produce the same report.
"""

from __future__ import annotations

import math
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyWarning, DomainError
from .modular_spaces import (
    DiscreteFunction,
    Mesh,
    VariableExponentField,
    lebesgue_luxemburg_norm,
    lebesgue_modular,
    musielak_luxemburg_norm,
)
from .musielak_core import certify_hypotheses, default_grid, lemma22_bounds
from .nonlocal_assembly import (
    AnisotropicSetup,
    QuadratureConfig,
    aniso_modular_Psi,
    aniso_norms,
    clarkson_gap,
    energy,
    energy_gradient,
    gagliardo_seminorm,
    get_threads,
    modular_gradient,
    monotonicity_gap,
)

__all__ = ["SuiteReport", "SUITES", "run_suite"]


@dataclass
class SuiteReport:
    name: str
    cases: int
    failures: list = field(default_factory=list)
    wall_time: float = 0.0
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.failures

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "cases": self.cases,
            "passed": self.passed,
            "failures": self.failures,
            "wall_time": self.wall_time,
            "stats": self.stats,
        }


def _failure(case, inputs, lhs, rhs, slack):
    return {"case": int(case), "inputs": inputs, "lhs": float(lhs), "rhs": float(rhs), "slack": float(slack)}


def _le(lhs, rhs, slack):
    """``lhs <= rhs`` up to a slack relative to the larger magnitude (absolute below 1)."""
    return lhs <= rhs + slack * max(1.0, abs(lhs), abs(rhs))


def _rng(seed, case):
    return np.random.default_rng([int(seed), int(case)])


def _map_cases(fn, cases):
    n = get_threads()
    if n <= 1:
        return [fn(k) for k in range(cases)]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, range(cases)))


def _random_u(setup, rng):
    while True:
        u = DiscreteFunction.random(setup.mesh, rng)
        if not u.is_zero():
            return u


# ---------------------------------------------------------------------------
# suites; each returns (failures, stats)


def _lemma22(setup, seed, cases, slack=1e-9, families=None, **_):
    families = setup.families if families is None else families
    mesh = setup.mesh
    lo, hi = mesh.lower, mesh.upper
    failures = []
    worst = {}
    for fi, fam in enumerate(families):
        rng = np.random.default_rng([int(seed), fi])
        x = lo + (hi - lo) * rng.random((cases, mesh.dim))
        y = lo + (hi - lo) * rng.random((cases, mesh.dim))
        t = 10.0 ** rng.uniform(-3, 3, cases)
        sigma = 10.0 ** rng.uniform(-2, 2, cases)
        sigma[sigma == 1.0] = 2.0
        b = lemma22_bounds(fam, x, y, t, sigma)
        low_gap = b.value - b.lower * (1 - slack)
        up_gap = b.upper * (1 + slack) - b.value
        bad = np.nonzero((low_gap < 0) | (up_gap < 0))[0]
        for k in bad:
            lhs, rhs = (b.lower[k], b.value[k]) if low_gap[k] < 0 else (b.value[k], b.upper[k])
            failures.append(_failure(fi * cases + k, {"family": repr(fam), "x": x[k].tolist(), "y": y[k].tolist(),
                                                      "t": t[k], "sigma": sigma[k]}, lhs, rhs, slack))
        rel = np.minimum(b.value / b.lower, b.upper / b.value) - 1.0
        worst[repr(fam)] = float(rel.min())
    return failures, {"min_relative_margin": worst}


def _norm_equiv(setup, seed, cases, slack=1e-7, qc=None, **_):
    N = setup.N

    def one(k):
        u = _random_u(setup, _rng(seed, k))
        nm = aniso_norms(u, setup, qc, slack=math.inf)
        out = []
        scale = max(nm.sum, 1.0)
        checks = [("max <= sum", nm.max, nm.sum), ("sum <= N max", nm.sum, N * nm.max),
                  ("sum <= N lux", nm.sum, N * nm.luxemburg), ("lux <= N sum", nm.luxemburg, N * nm.sum)]
        for label, lhs, rhs in checks:
            if lhs > rhs + slack * scale:
                out.append(_failure(k, {"check": label}, lhs, rhs, slack))
        return out, nm.luxemburg / nm.sum

    res = _map_cases(one, cases)
    ratios = [r for _, r in res]
    return [f for fs, _ in res for f in fs], {"lux_over_sum": [min(ratios), max(ratios)]}


def _modular_norm(setup, seed, cases, slack=1e-7, qc=None, **_):
    lo, up = setup.phi_minus_min, setup.phi_plus_max

    def one(k):
        u = _random_u(setup, _rng(seed, k))
        target = 0.5 if k % 2 == 0 else 2.0
        u = u.scaled(target / aniso_norms(u, setup, qc, slack=math.inf).luxemburg)
        nm = aniso_norms(u, setup, qc, slack=math.inf).luxemburg
        psi = aniso_modular_Psi(u, setup, qc)
        if nm > 1:
            a, b = nm**lo, nm**up
        else:
            a, b = nm**up, nm**lo
        out = []
        if not _le(a, psi, slack):
            out.append(_failure(k, {"norm": nm, "side": "lower"}, a, psi, slack))
        if not _le(psi, b, slack):
            out.append(_failure(k, {"norm": nm, "side": "upper"}, psi, b, slack))
        return out

    return [f for fs in _map_cases(one, cases) for f in fs], {}


def _poincare(setup, seed, cases, levels=2, qc=None, **_):
    """Ratio ``||u||_{Phi_hat_i} / [u]_i`` on up to ``levels`` coarser meshes and the setup mesh.

    Coarse meshes have ``cells // 2^j`` cells per axis (at least 2), so the
    finest level is the setup mesh and memory stays bounded by it.
    """
    failures = []
    per_level = []
    mesh = setup.mesh
    cells = np.asarray(mesh.cells_per_axis)
    meshes = []
    for j in range(levels, 0, -1):
        c = tuple(int(max(2, n // 2**j)) for n in cells)
        if c != tuple(int(n) for n in cells) and (not meshes or meshes[-1].cells_per_axis != c):
            meshes.append(Mesh.box(mesh.lower, mesh.upper, c, mesh.gauss_order))
    meshes.append(mesh)
    for level, msh in enumerate(meshes):
        st = setup if msh is mesh else setup.with_mesh(msh)
        worst = np.zeros(st.N)
        for k in range(cases):
            u = _random_u(st, _rng(seed, k + 1000 * level))
            for i, fam in enumerate(st.families):
                r = musielak_luxemburg_norm(u, fam) / gagliardo_seminorm(u, st, i, qc)
                if not np.isfinite(r) or r <= 0:
                    failures.append(_failure(k, {"level": level, "direction": i}, r, math.inf, 0.0))
                worst[i] = max(worst[i], r)
        per_level.append(worst.tolist())
    # refinement must not let the empirical constant run away
    arr = np.array(per_level)
    for level in range(1, len(arr)):
        for i in range(arr.shape[1]):
            if arr[level, i] > 2.0 * arr[level - 1, i]:
                failures.append(_failure(-1, {"level": level, "direction": i, "check": "refinement stability"},
                                         arr[level, i], 2.0 * arr[level - 1, i], 0.0))
    return failures, {"constant_per_level": per_level}


def _monotonicity(setup, seed, cases, slack=1e-8, qc=None, **_):
    def one(k):
        rng = _rng(seed, k)
        u, v = _random_u(setup, rng), _random_u(setup, rng)
        out = []
        for i in range(setup.N):
            lhs, rhs = monotonicity_gap(u, v, setup, i, qc)
            if not _le(rhs, lhs, slack):
                out.append(_failure(k, {"direction": i}, lhs, rhs, slack))
        return out

    return [f for fs in _map_cases(one, cases) for f in fs], {}


def _clarkson(setup, seed, cases, slack=1e-8, qc=None, **_):
    mesh = setup.mesh
    grid = default_grid(mesh.lower, mesh.upper, 16, 32)
    dirs = [i for i, fam in enumerate(setup.families) if certify_hypotheses(fam, grid).sqrt_convex]

    def one(k):
        rng = _rng(seed, k)
        u, v = _random_u(setup, rng), _random_u(setup, rng)
        out = []
        for i in dirs:
            lhs, rhs = clarkson_gap(u, v, setup, i, qc)
            if not _le(rhs, lhs, slack):
                out.append(_failure(k, {"direction": i}, lhs, rhs, slack))
        return out

    skipped = [i for i in range(setup.N) if i not in dirs]
    return [f for fs in _map_cases(one, cases) for f in fs], {"directions": dirs, "skipped_directions": skipped}


def _gradient_fd(setup, seed, cases, rtol=1e-5, eps=1e-5, lam=1.0, qc=None, **_):
    worst = {"psi": 0.0, "energy": 0.0}

    def one(k):
        rng = _rng(seed, k)
        u, v = _random_u(setup, rng), _random_u(setup, rng)
        vc = v.interior_values
        out = []
        pairs = [
            ("psi", float(modular_gradient(u, setup, qc) @ vc),
             lambda w: aniso_modular_Psi(w, setup, qc)),
            ("energy", float(energy_gradient(u, setup, lam, qc) @ vc),
             lambda w: energy(w, setup, lam, qc)),
        ]
        errs = {}
        for label, an, F in pairs:
            fd = (F(u + v * eps) - F(u - v * eps)) / (2 * eps)
            err = abs(fd - an) / max(abs(an), 1e-300)
            errs[label] = err
            if not err < rtol:
                out.append(_failure(k, {"functional": label, "eps": eps}, err, rtol, 0.0))
        return out, errs

    res = _map_cases(one, cases)
    for _, errs in res:
        for key, val in errs.items():
            worst[key] = max(worst[key], val)
    return [f for fs, _ in res for f in fs], {"max_relative_error": worst}


def _embedding(setup, seed, cases, qc=None, **_):
    q = setup.exponent
    qp, qm = VariableExponentField.constant(q.q_plus), VariableExponentField.constant(q.q_minus)
    best = {"q_plus": 0.0, "q_minus": 0.0, "q": 0.0}
    failures = []
    for k in range(cases):
        u = _random_u(setup, _rng(seed, k))
        den = sum(gagliardo_seminorm(u, setup, i, qc) for i in range(setup.N))
        for key, field_ in (("q_plus", qp), ("q_minus", qm), ("q", q)):
            r = lebesgue_luxemburg_norm(u, field_) / den
            if not (np.isfinite(r) and r > 0):
                failures.append(_failure(k, {"exponent": key}, r, math.inf, 0.0))
            else:
                best[key] = max(best[key], r)
    return failures, {"max_ratio": best}


def _lebesgue_modular(setup, seed, cases, slack=1e-8, **_):
    q = setup.exponent
    lo, up = q.q_minus, q.q_plus

    def one(k):
        u = _random_u(setup, _rng(seed, k))
        target = 0.5 if k % 2 == 0 else 2.0
        u = u.scaled(target / lebesgue_luxemburg_norm(u, q))
        nm = lebesgue_luxemburg_norm(u, q)
        rho = lebesgue_modular(u, q)
        a, b = (nm**lo, nm**up) if nm > 1 else (nm**up, nm**lo)
        out = []
        if not _le(a, rho, slack):
            out.append(_failure(k, {"norm": nm, "side": "lower"}, a, rho, slack))
        if not _le(rho, b, slack):
            out.append(_failure(k, {"norm": nm, "side": "upper"}, rho, b, slack))
        # norm-modular consistency at the unit sphere
        unit = lebesgue_modular(u.scaled(1.0 / nm), q)
        if abs(unit - 1.0) > 1e-8:
            out.append(_failure(k, {"check": "rho(u/|u|) = 1"}, unit, 1.0, 1e-8))
        return out

    return [f for fs in _map_cases(one, cases) for f in fs], {}


SUITES = {
    "lemma22": _lemma22,
    "norm_equiv": _norm_equiv,
    "modular_norm": _modular_norm,
    "poincare": _poincare,
    "monotonicity": _monotonicity,
    "clarkson": _clarkson,
    "gradient_fd": _gradient_fd,
    "embedding": _embedding,
    "lebesgue_modular": _lebesgue_modular,
}


def run_suite(name: str, setup: AnisotropicSetup, seed: int = 0, cases: int = 100,
              qc: QuadratureConfig | None = None, **options) -> SuiteReport:
    """Run the named suite; ``options`` are forwarded (``slack``, ``families``, ``levels``, ...)."""
    if name not in SUITES:
        raise DomainError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}")
    if cases < 1:
        raise DomainError("cases must be positive")
    t0 = time.perf_counter()
    with warnings.catch_warnings():
        # truncation accuracy is a property of the setup, not of the suite under test
        warnings.simplefilter("ignore", AccuracyWarning)
        failures, stats = SUITES[name](setup, seed, cases, qc=qc, **options)
    return SuiteReport(name, cases, failures, time.perf_counter() - t0, stats)
