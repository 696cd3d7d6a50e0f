"""Command line entry point: ``fracmusielak {check,solve,sweep,norms}``.

Configs are JSON files; see ``configs/`` for the shipped examples and the
README for the key reference. Exit codes: 0 success, 2 config error,
3 regime error, 4 non-convergence.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .eigensolver import (
    SolverOptions,
    classify_regime,
    embedding_constant,
    lambda_star,
    solve_mountain_pass,
    solve_sublinear,
    verify_eigen,
)
from .errors import AccuracyWarning, ConfigError, ConvergenceError, FracMusielakError, RegimeError, SetupError
from .modular_spaces import DiscreteFunction, Mesh, VariableExponentField
from .musielak_core import ConstantPower, LogPerturbed, VariableExponent
from .nonlocal_assembly import (
    AnisotropicSetup,
    KirchhoffNonlinearity,
    QuadratureConfig,
    aniso_modular_Psi,
    aniso_norms,
    set_threads,
    tail_bound,
)
from .verification_harness import SUITES, run_suite

SCHEMA_VERSION = "1"
EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_CONVERGENCE = 0, 2, 3, 4

LAMBDA_STAR_CAVEAT = (
    "caveat: lambda* uses a sampled c1 (largest ratio ||u||_q / ||u||_Phi over test functions), "
    "a lower estimate of the best embedding constant, so lambda* may overestimate the true threshold"
)

_TOP_KEYS = {"schema_version", "dimension", "domain", "mesh", "families", "orders", "exponent", "kirchhoff",
             "quadrature", "solver", "check", "output", "seed"}


# ---------------------------------------------------------------------------
# config


@dataclass
class RunConfig:
    raw: dict
    setup: AnisotropicSetup
    qc: QuadratureConfig
    solver: dict
    check: dict
    output: dict
    seed: int = 0
    warnings: list = field(default_factory=list)


def _get(d, key, path, kind=None, default=None, required=False):
    full = f"{path}.{key}" if path else key
    if key not in d:
        if required:
            raise ConfigError(f"missing key '{full}'", key=full)
        return default
    val = d[key]
    if kind is not None and not isinstance(val, kind) or isinstance(val, bool) and kind in ((int, float), int):
        raise ConfigError(f"'{full}' has the wrong type ({type(val).__name__})", key=full)
    return val


def _no_extra(d, allowed, path):
    for k in d:
        if k not in allowed:
            full = f"{path}.{k}" if path else k
            raise ConfigError(f"unknown key '{full}'", key=full)


def _wrap(key, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except (SetupError, ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"'{key}': {exc}", key=key) from exc


def _num(d, key, path, default=None, required=False):
    return _get(d, key, path, (int, float), default, required)


def _family(spec, i, lower, upper):
    path = f"families[{i}]"
    if not isinstance(spec, dict):
        raise ConfigError(f"'{path}' must be an object", key=path)
    kind = _get(spec, "kind", path, str, required=True)
    if kind == "ConstantPower":
        _no_extra(spec, {"kind", "p"}, path)
        return _wrap(f"{path}.p", ConstantPower, _num(spec, "p", path, required=True))
    if kind == "VariableExponent":
        _no_extra(spec, {"kind", "p_min", "p_max"}, path)
        lo, up = _num(spec, "p_min", path, required=True), _num(spec, "p_max", path, required=True)
        return _wrap(f"{path}.p_min", VariableExponent.affine, lo, up, lower, upper)
    if kind == "LogPerturbed":
        _no_extra(spec, {"kind", "p", "shift"}, path)
        return _wrap(f"{path}.p", LogPerturbed, _num(spec, "p", path, required=True),
                     _num(spec, "shift", path, default=math.e))
    raise ConfigError(f"'{path}.kind' must be ConstantPower, VariableExponent or LogPerturbed (got {kind!r})",
                      key=f"{path}.kind")


def _exponent(spec, mesh):
    path = "exponent"
    if not isinstance(spec, dict):
        raise ConfigError("'exponent' must be an object", key=path)
    kind = _get(spec, "kind", path, str, required=True)
    if kind == "constant":
        _no_extra(spec, {"kind", "q"}, path)
        return _wrap("exponent.q", VariableExponentField.constant, _num(spec, "q", path, required=True))
    if kind == "affine":
        _no_extra(spec, {"kind", "q0", "q1"}, path)
        return _wrap("exponent.q0", VariableExponentField.affine, _num(spec, "q0", path, required=True),
                     _num(spec, "q1", path, required=True), mesh.lower, mesh.upper)
    if kind == "nodal":
        _no_extra(spec, {"kind", "values"}, path)
        vals = _get(spec, "values", path, list, required=True)
        if len(vals) != mesh.n_vertices:
            raise ConfigError(f"'exponent.values' needs {mesh.n_vertices} vertex values (got {len(vals)})",
                              key="exponent.values")
        return _wrap("exponent.values", VariableExponentField.nodal, mesh, vals)
    raise ConfigError(f"'exponent.kind' must be constant, affine or nodal (got {kind!r})", key="exponent.kind")


def _kirchhoff(spec):
    path = "kirchhoff"
    if spec is None:
        return KirchhoffNonlinearity.constant()
    if not isinstance(spec, dict):
        raise ConfigError("'kirchhoff' must be an object", key=path)
    _no_extra(spec, {"kind", "m0", "b", "theta"}, path)
    kind = _get(spec, "kind", path, str, default="constant")
    m0 = _num(spec, "m0", path, default=1.0)
    theta = _num(spec, "theta", path)
    if kind == "constant":
        K = _wrap("kirchhoff.m0", KirchhoffNonlinearity.constant, m0)
        if theta is not None:
            # any theta >= 1 satisfies t M <= theta M_hat for constant M
            K = _wrap("kirchhoff.theta", KirchhoffNonlinearity, K.M, K.M_hat, K.m0, theta, kind="constant",
                      params={"m0": float(m0)})
        return K
    if kind == "affine":
        b = _num(spec, "b", path, default=1.0)
        K = _wrap("kirchhoff.b", KirchhoffNonlinearity.affine, m0, b)
        if theta is not None:
            K = _wrap("kirchhoff.theta", KirchhoffNonlinearity, K.M, K.M_hat, K.m0, theta, dM=K.dM,
                      kind="affine", params=K.params)
        return K
    raise ConfigError(f"'kirchhoff.kind' must be constant or affine (got {kind!r})", key="kirchhoff.kind")


def parse_config(raw: dict) -> RunConfig:
    """Validate a config mapping and build the setup; errors name the offending key."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object", key="<root>")
    _no_extra(raw, _TOP_KEYS, "")
    ver = raw.get("schema_version", SCHEMA_VERSION)
    if str(ver) != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {ver!r} (expected {SCHEMA_VERSION})", key="schema_version")
    N = _get(raw, "dimension", "", int, required=True)
    if N not in (1, 2):
        raise ConfigError(f"'dimension' must be 1 or 2 (got {N})", key="dimension")

    dom = _get(raw, "domain", "", dict, default={})
    _no_extra(dom, {"lower", "upper"}, "domain")
    lower = _get(dom, "lower", "domain", list, default=[0.0] * N)
    upper = _get(dom, "upper", "domain", list, default=[1.0] * N)
    if len(lower) != N or len(upper) != N:
        raise ConfigError(f"'domain.lower'/'domain.upper' need {N} entries", key="domain")
    if not all(b > a for a, b in zip(lower, upper)):
        raise ConfigError("'domain.upper' must exceed 'domain.lower' in every coordinate", key="domain.upper")

    quad = _get(raw, "quadrature", "", dict, default={})
    _no_extra(quad, {"gauss_order", "near_levels", "tail_radius_factor", "far_field_ratio", "far_order",
                     "summation"}, "quadrature")
    gauss = _get(quad, "gauss_order", "quadrature", int, default=3)

    msh = _get(raw, "mesh", "", dict, required=True)
    _no_extra(msh, {"cells"}, "mesh")
    cells = _get(msh, "cells", "mesh", (int, list), required=True)
    cells = [cells] * N if isinstance(cells, int) else cells
    if len(cells) != N or not all(isinstance(c, int) and c >= 2 for c in cells):
        raise ConfigError(f"'mesh.cells' must be an integer >= 2 or a list of {N} such", key="mesh.cells")
    mesh = _wrap("mesh", Mesh.box, lower, upper, tuple(cells), gauss)

    fams = _get(raw, "families", "", list, required=True)
    if len(fams) != N:
        raise ConfigError(f"'families' needs {N} entries (one per direction)", key="families")
    families = [_family(f, i, lower, upper) for i, f in enumerate(fams)]
    orders = _get(raw, "orders", "", list, required=True)
    if len(orders) != N:
        raise ConfigError(f"'orders' needs {N} entries", key="orders")
    for i, s in enumerate(orders):
        if not isinstance(s, (int, float)) or not 0.0 < s < 1.0:
            raise ConfigError(f"'orders[{i}]' must lie in (0, 1) (got {s!r})", key=f"orders[{i}]")
    exponent = _exponent(_get(raw, "exponent", "", dict, required=True), mesh)
    kirch = _kirchhoff(_get(raw, "kirchhoff", "", dict))
    setup = _wrap("exponent", AnisotropicSetup, families, orders, mesh, exponent, kirch)

    factor = _num(quad, "tail_radius_factor", "quadrature", default=8.0)
    qc = _wrap("quadrature", QuadratureConfig, gauss_order=gauss,
               near_levels=_get(quad, "near_levels", "quadrature", int, default=4),
               tail_radius=float(factor) * mesh.diam,
               summation=_get(quad, "summation", "quadrature", str, default="compensated"),
               far_field_ratio=_num(quad, "far_field_ratio", "quadrature", default=3.0),
               far_order=_get(quad, "far_order", "quadrature", int, default=2))
    _wrap("quadrature.tail_radius_factor", qc.radius, mesh)

    solver = _get(raw, "solver", "", dict, default={})
    _no_extra(solver, {"method", "lambda", "lambda_star_fraction", "sweep", "tol", "max_iter", "override_regime",
                       "rho_ball", "c1_samples", "path_points"}, "solver")
    method = _get(solver, "method", "solver", str, default="auto")
    if method not in ("auto", "mountain_pass", "sublinear"):
        raise ConfigError("'solver.method' must be auto, mountain_pass or sublinear", key="solver.method")
    if "lambda" in solver and "lambda_star_fraction" in solver:
        raise ConfigError("give either 'solver.lambda' or 'solver.lambda_star_fraction'", key="solver.lambda")
    for key in ("lambda", "lambda_star_fraction", "tol", "rho_ball"):
        v = _num(solver, key, "solver")
        if v is not None and not v > 0:
            raise ConfigError(f"'solver.{key}' must be positive", key=f"solver.{key}")
    sweep = _get(solver, "sweep", "solver", dict)
    if sweep is not None:
        _no_extra(sweep, {"lambdas", "lambda_star_fractions"}, "solver.sweep")
        if ("lambdas" in sweep) == ("lambda_star_fractions" in sweep):
            raise ConfigError("'solver.sweep' needs exactly one of lambdas / lambda_star_fractions",
                              key="solver.sweep")
        for key, vals in sweep.items():
            if not isinstance(vals, list) or not vals or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in vals):
                raise ConfigError(f"'solver.sweep.{key}' must be a nonempty list of positive numbers",
                                  key=f"solver.sweep.{key}")
    for key in ("max_iter", "c1_samples", "path_points"):
        v = _get(solver, key, "solver", int)
        if v is not None and v < 1:
            raise ConfigError(f"'solver.{key}' must be a positive integer", key=f"solver.{key}")
    if solver.get("c1_samples", 64) < 32:
        raise ConfigError("'solver.c1_samples' must be >= 32", key="solver.c1_samples")
    _get(solver, "override_regime", "solver", bool)

    check = _get(raw, "check", "", dict, default={})
    _no_extra(check, {"suites", "cases", "lemma22_cases"}, "check")
    suites = _get(check, "suites", "check", list, default=list(SUITES))
    for s in suites:
        if s not in SUITES:
            raise ConfigError(f"'check.suites' has unknown suite {s!r}", key="check.suites")
    for key in ("cases", "lemma22_cases"):
        v = _get(check, key, "check", int)
        if v is not None and v < 1:
            raise ConfigError(f"'check.{key}' must be a positive integer", key=f"check.{key}")

    output = _get(raw, "output", "", dict, default={})
    _no_extra(output, {"dir"}, "output")
    _get(output, "dir", "output", str)
    seed = _get(raw, "seed", "", int, default=0)
    return RunConfig(raw, setup, qc, solver, check, output, seed)


def load_config(path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {str(p)!r}: {exc.strerror or exc}", key="--config") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})", key="--config") from exc
    return parse_config(raw)


def shipped_config(name: str) -> Path:
    """Path of a config shipped with the package (``default``, ``superlinear``, ``sublinear``)."""
    return Path(str(resources.files("fracmusielak") / "configs" / f"{name}.json"))


# ---------------------------------------------------------------------------
# helpers


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _report(cfg: RunConfig, command: str, **body) -> dict:
    return _jsonable({"schema_version": SCHEMA_VERSION, "command": command, "seed": cfg.seed,
                      "config": cfg.raw, "setup": cfg.setup.describe(), **body})


def _write_json(out: Path, name: str, report: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    path.write_text(json.dumps(report, indent=2) + "\n")
    return path


def _write_trace(out: Path, name: str, trace) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "energy", "residual"])
        for it, e, r in trace:
            w.writerow([int(it), repr(float(e)), repr(float(r))])
    return path


def tail_diagnostics(cfg: RunConfig) -> dict:
    """Tail bound of the bump at the configured radius, absolute and relative to Psi."""
    bump = DiscreteFunction.bump(cfg.setup.mesh)
    R = cfg.qc.radius(cfg.setup.mesh)
    tb = tail_bound(bump, cfg.setup, R)
    with warnings.catch_warnings():
        # the relative size is reported below
        warnings.simplefilter("ignore", AccuracyWarning)
        psi = aniso_modular_Psi(bump, cfg.setup, cfg.qc)
    return {"function": "bump", "R": R, "tail_bound": tb, "psi": psi, "relative": tb / psi if psi > 0 else 0.0}


def _regime_block(cfg: RunConfig) -> tuple[dict, float | None, float | None]:
    reg = classify_regime(cfg.setup)
    block = reg.as_dict()
    block["hypotheses"] = reg.hypotheses()
    lam_star = c1 = None
    if reg.tag == "Sublinear":
        samples = cfg.solver.get("c1_samples", 64)
        c1 = embedding_constant(cfg.setup, samples, cfg.qc, seed=cfg.seed)
        rho = cfg.solver.get("rho_ball", 0.9 * min(1.0, 1.0 / c1))
        lam_star = lambda_star(cfg.setup, rho, c1)
        block.update({"c1": c1, "rho_ball": rho, "lambda_star": lam_star, "lambda_star_caveat": LAMBDA_STAR_CAVEAT})
    else:
        block["lambda_star"] = None
    return block, lam_star, c1


def _options(cfg: RunConfig, override: bool, c1: float | None) -> SolverOptions:
    s = cfg.solver
    kw = {"override_regime": override or bool(s.get("override_regime", False)), "seed": cfg.seed}
    for key in ("tol", "max_iter", "rho_ball", "c1_samples", "path_points"):
        if key in s:
            kw[key] = s[key]
    if c1 is not None:
        kw["c1"] = c1
    return SolverOptions(**kw)


def _method(cfg: RunConfig, tag: str) -> str:
    m = cfg.solver.get("method", "auto")
    if m != "auto":
        return m
    return "sublinear" if tag == "Sublinear" else "mountain_pass"


def _lambdas(cfg: RunConfig, lam_star: float | None, sweep: bool) -> list[float]:
    s = cfg.solver
    if sweep:
        spec = s.get("sweep")
        if spec is None:
            raise ConfigError("'solver.sweep' is required for the sweep command", key="solver.sweep")
        if "lambdas" in spec:
            return [float(v) for v in spec["lambdas"]]
        if lam_star is None:
            raise ConfigError("'solver.sweep.lambda_star_fractions' needs the sublinear regime",
                              key="solver.sweep.lambda_star_fractions")
        return [float(f) * lam_star for f in spec["lambda_star_fractions"]]
    if "lambda" in s:
        return [float(s["lambda"])]
    if "lambda_star_fraction" in s:
        if lam_star is None:
            raise ConfigError("'solver.lambda_star_fraction' needs the sublinear regime",
                              key="solver.lambda_star_fraction")
        return [float(s["lambda_star_fraction"]) * lam_star]
    raise ConfigError("'solver.lambda' (or lambda_star_fraction) is required for solve", key="solver.lambda")


def _out_dir(cfg: RunConfig, args) -> Path:
    if args.out is not None:
        return Path(args.out)
    return Path(cfg.output.get("dir", "fracmusielak-out"))


# ---------------------------------------------------------------------------
# commands


def cmd_check(cfg: RunConfig, args) -> int:
    cases = cfg.check.get("cases", 20)
    reports = []
    ok = True
    for name in cfg.check.get("suites", list(SUITES)):
        n = cfg.check.get("lemma22_cases", 10_000) if name == "lemma22" else cases
        rep = run_suite(name, cfg.setup, seed=cfg.seed, cases=n, qc=cfg.qc)
        ok &= rep.passed
        print(f"{name:<18} {'pass' if rep.passed else 'FAIL'}  cases={rep.cases:<6} "
              f"failures={len(rep.failures):<4} {rep.wall_time:7.2f}s")
        reports.append(rep.as_dict())
    tail = tail_diagnostics(cfg)
    print(f"tail bound (bump, R={tail['R']:g}): {tail['tail_bound']:.3e}  relative to Psi {tail['relative']:.3e}")
    path = _write_json(_out_dir(cfg, args), "check.json",
                       _report(cfg, "check", passed=bool(ok), suites=reports, tail=tail))
    print(f"report: {path}")
    return EXIT_OK if ok else 1


def _solve_many(cfg: RunConfig, args, sweep: bool) -> int:
    block, lam_star, c1 = _regime_block(cfg)
    tag = block["tag"]
    print(f"regime: {tag}  (phi+_max={block['phi_plus_max']:g}, phi-_min={block['phi_minus_min']:g}, "
          f"q-={block['q_minus']:g}, q+={block['q_plus']:g}, theta={block['theta']:g})")
    override = args.override_regime or bool(cfg.solver.get("override_regime", False))
    if tag == "Indeterminate" and not override:
        print("error: regime is Indeterminate; neither hypothesis holds:", file=sys.stderr)
        for h in block["hypotheses"]:
            print(f"  {h}", file=sys.stderr)
        print("use --override-regime to solve anyway", file=sys.stderr)
        return EXIT_REGIME
    if lam_star is not None:
        print(f"lambda* = {lam_star:.6g}  (c1 = {c1:.6g}, rho = {block['rho_ball']:.6g})")
        print(LAMBDA_STAR_CAVEAT)
    lams = _lambdas(cfg, lam_star, sweep)
    method = _method(cfg, tag)
    solver = solve_sublinear if method == "sublinear" else solve_mountain_pass
    opts = _options(cfg, override, c1)
    out = _out_dir(cfg, args)
    sols = []
    all_ok = True
    for j, lam in enumerate(lams):
        try:
            sol = solver(cfg.setup, lam, cfg.qc, opts)
        except ConvergenceError as exc:
            sol = exc.solution
            all_ok = False
            print(f"lambda={lam:.6g}: not converged: {exc}", file=sys.stderr)
            if sol is None:
                sols.append({"lambda": lam, "converged": False, "error": str(exc)})
                continue
        ver = verify_eigen(sol, cfg.setup, cfg.qc) if sol.converged else None
        trace = _write_trace(out, f"trace_{j:03d}.csv", sol.trace)
        d = sol.as_dict()
        d.update({"method": method, "trace_csv": trace.name, "verification": ver.as_dict() if ver else None})
        sols.append(d)
        status = "converged" if sol.converged else "NOT converged"
        vtxt = "" if ver is None else f"  verify={'pass' if ver.passed else 'FAIL'}"
        print(f"lambda={lam:.6g}: {status}  energy={sol.energy:.8g}  residual={sol.residual:.3e}  "
              f"iterations={sol.iterations}{vtxt}")
    body = {"regime": block, "solutions": sols, "tail": tail_diagnostics(cfg)}
    if sweep:
        energies = [s["energy"] for s in sols if "energy" in s]
        order = np.argsort([s["lambda"] for s in sols if "energy" in s])
        e = np.asarray(energies)[order]
        diffs = np.diff(e)
        mono = "decreasing" if np.all(diffs <= 0) else "increasing" if np.all(diffs >= 0) else "none"
        body["energy_monotonicity"] = mono
        print(f"energies monotone in lambda: {mono}")
    path = _write_json(out, "sweep.json" if sweep else "solve.json", _report(cfg, "sweep" if sweep else "solve",
                                                                           **body))
    print(f"report: {path}")
    return EXIT_OK if all_ok else EXIT_CONVERGENCE


def cmd_solve(cfg: RunConfig, args) -> int:
    return _solve_many(cfg, args, sweep=False)


def cmd_sweep(cfg: RunConfig, args) -> int:
    return _solve_many(cfg, args, sweep=True)


def test_function(spec: str, mesh: Mesh, seed: int = 0) -> DiscreteFunction:
    """Built-in test functions: ``bump``, ``zero``, ``hat[:K]``, ``random[:SEED]``."""
    name, _, arg = spec.partition(":")
    if name == "bump" and not arg:
        return DiscreteFunction.bump(mesh)
    if name == "zero" and not arg:
        return DiscreteFunction.zero(mesh)
    try:
        if name == "hat":
            k = int(arg) if arg else mesh.n_dofs // 2
            if not 0 <= k < mesh.n_dofs:
                raise ConfigError(f"hat index must lie in [0, {mesh.n_dofs})", key="--function")
            return DiscreteFunction.hat(mesh, k)
        if name == "random":
            return DiscreteFunction.random(mesh, np.random.default_rng(int(arg) if arg else seed))
    except ValueError as exc:
        raise ConfigError(f"bad function spec {spec!r}", key="--function") from exc
    raise ConfigError(f"unknown function {spec!r}; use bump, zero, hat[:K] or random[:SEED]", key="--function")


def cmd_norms(cfg: RunConfig, args) -> int:
    u = test_function(args.function, cfg.setup.mesh, cfg.seed)
    nrm = aniso_norms(u, cfg.setup, cfg.qc, slack=math.inf)
    N = cfg.setup.N
    chain = {
        "max<=lux": nrm.luxemburg - nrm.max,
        "lux<=N*max": N * nrm.max - nrm.luxemburg,
        "lux<=N*sum": N * nrm.sum - nrm.luxemburg,
        "sum<=N*lux": N * nrm.luxemburg - nrm.sum,
    }
    tol = 1e-7 * max(nrm.sum, 1.0)
    holds = all(v >= -tol for v in chain.values())
    print(f"function: {args.function}")
    print(f"norm (sum of seminorms): {nrm.sum:.12g}")
    print(f"norm (max of seminorms): {nrm.max:.12g}")
    print(f"norm (Luxemburg of Psi): {nrm.luxemburg:.12g}")
    for i, s in enumerate(nrm.seminorms):
        print(f"seminorm[{i}]: {s:.12g}")
    print(f"Psi: {nrm.psi:.12g}")
    print("equivalence chain " + ("holds" if holds else "VIOLATED") + "; slack per inequality:")
    for k, v in chain.items():
        print(f"  {k:<12} {v:.6e}")
    if args.out is not None:
        body = {"function": args.function, "norms": nrm.as_dict(), "chain_slack": chain, "chain_holds": holds}
        print(f"report: {_write_json(_out_dir(cfg, args), 'norms.json', _report(cfg, 'norms', **body))}")
    return EXIT_OK if holds else 1


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fracmusielak",
                                 description="Anisotropic fractional Musielak-Sobolev modulars and eigenproblems.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None,
                        help="JSON config (default: the shipped 'default' config)")
    common.add_argument("--out", default=None, help="output directory for JSON/CSV reports")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for pair evaluation (env FRACMUSIELAK_THREADS)")
    common.add_argument("--override-regime", action="store_true",
                        help="solve even when the regime is Indeterminate or mismatched")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("check", parents=[common], help="run the property suites")
    sub.add_parser("solve", parents=[common], help="solve for one lambda")
    sub.add_parser("sweep", parents=[common], help="solve for a list of lambdas")
    p = sub.add_parser("norms", parents=[common], help="anisotropic norms of a built-in test function")
    p.add_argument("--function", default="bump", help="bump | zero | hat[:K] | random[:SEED]")
    return ap


COMMANDS = {"check": cmd_check, "solve": cmd_solve, "sweep": cmd_sweep, "norms": cmd_norms}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads is not None:
        if args.threads < 1:
            print("error: --threads must be positive", file=sys.stderr)
            return EXIT_CONFIG
        set_threads(args.threads)
    try:
        cfg = load_config(args.config if args.config is not None else shipped_config("default"))
        if args.seed is not None:
            cfg.seed = args.seed
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RegimeError as exc:
        print(f"regime error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except FracMusielakError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if args.threads is not None:
            set_threads(None)


if __name__ == "__main__":
    sys.exit(main())
