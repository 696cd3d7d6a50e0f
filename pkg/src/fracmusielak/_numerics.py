"""Quadrature rules, root finders and reductions shared by the modules."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import optimize

from .errors import ConvergenceError

_BLOCK = 4096


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(int(n))
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=None)
def graded01(n: int, levels: int, ratio: float = 0.2, power: int = 4):
    """Rule on [0, 1] for integrands with an integrable power singularity at 0.

    Geometric panels ``[ratio**(k+1), ratio**k]`` carry an ``n``-point Gauss
    rule each; the innermost panel ``[0, ratio**levels]`` is mapped through
    ``t = eps * w**power`` which removes singularities ``t**(a-1)`` with
    ``a*power >= 1``.
    """
    g, gw = gauss01(n)
    nodes, weights = [], []
    for k in range(levels):
        lo, hi = ratio ** (k + 1), ratio**k
        nodes.append(lo + (hi - lo) * g)
        weights.append((hi - lo) * gw)
    eps = ratio**levels
    nodes.append(eps * g**power)
    weights.append(eps * power * g ** (power - 1) * gw)
    x = np.concatenate(nodes)
    w = np.concatenate(weights)
    order = np.argsort(x)
    return x[order], w[order]


# Symmetric triangle rules in barycentric coordinates; weights sum to one.
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.full(3, 1 / 3),
    ),
}


def _dunavant6():
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = []
    for c in (a, b):
        pts += [[c, c, 1 - 2 * c], [c, 1 - 2 * c, c], [1 - 2 * c, c, c]]
    return np.array(pts), np.array([wa] * 3 + [wb] * 3)


def _dunavant7():
    a, wa = 0.470142064105115, 0.132394152788506
    b, wb = 0.101286507323456, 0.125939180544827
    pts = [[1 / 3, 1 / 3, 1 / 3]]
    for c in (a, b):
        pts += [[c, c, 1 - 2 * c], [c, 1 - 2 * c, c], [1 - 2 * c, c, c]]
    return np.array(pts), np.array([0.225] + [wa] * 3 + [wb] * 3)


_TRI_RULES[3] = _dunavant6()
_TRI_RULES[4] = _dunavant7()


def triangle_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Barycentric points and unit-sum weights (orders above 4 reuse the 7-point rule)."""
    order = max(1, int(order))
    return _TRI_RULES[min(order, 4)]


def line_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss rule on [0, 1] used for interval cells of a given order."""
    return gauss01(max(1, int(order)))


def reduce_sum(values: np.ndarray, mode: str = "compensated") -> float:
    """Order-fixed sum of a 1D array.

    ``pairwise`` relies on numpy's pairwise summation. ``compensated``
    sums fixed-size blocks pairwise and combines the block sums exactly
    with ``math.fsum``; the result depends only on the array order.
    """
    values = np.asarray(values, dtype=float).ravel()
    if mode == "pairwise" or values.size <= _BLOCK:
        if mode == "pairwise":
            return float(np.sum(values))
        return math.fsum(values.tolist())
    n_full = values.size // _BLOCK * _BLOCK
    blocks = values[:n_full].reshape(-1, _BLOCK).sum(axis=1)
    tail = values[n_full:]
    return math.fsum(blocks.tolist() + tail.tolist())


def luxemburg_bisection(modular, rtol: float = 1e-10, max_iter: int = 200) -> float:
    """Return the unique lam > 0 with modular(lam) == 1.

    ``modular`` must be strictly decreasing in lam and continuous. The
    bracket is grown by doubling or halving from lam = 1 and then bisected
    in log scale until its relative width is below ``rtol``.
    """
    lo = hi = 1.0
    if modular(1.0) > 1.0:
        for _ in range(max_iter):
            hi *= 2.0
            if modular(hi) <= 1.0:
                break
            lo = hi
        else:
            raise ConvergenceError("could not bracket the Luxemburg root from above")
    else:
        for _ in range(max_iter):
            lo *= 0.5
            if modular(lo) > 1.0:
                break
            hi = lo
        else:
            raise ConvergenceError("could not bracket the Luxemburg root from below")
    for _ in range(max_iter):
        if hi / lo - 1.0 <= rtol:
            break
        mid = math.sqrt(lo * hi)
        if modular(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    return math.sqrt(lo * hi)


def luxemburg_brent(modular, lo: float, hi: float, rtol: float = 1e-12) -> float:
    """Luxemburg root from a known bracket using Brent's method on log(lam)."""
    lo, hi = float(lo), float(hi)
    f = lambda z: modular(math.exp(z)) - 1.0
    flo, fhi = f(math.log(lo)), f(math.log(hi))
    # widen the bracket if rounding pushed the root just outside
    for _ in range(60):
        if flo >= 0.0:
            break
        lo *= 0.5
        flo = f(math.log(lo))
    for _ in range(60):
        if fhi <= 0.0:
            break
        hi *= 2.0
        fhi = f(math.log(hi))
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    z = optimize.brentq(f, math.log(lo), math.log(hi), xtol=rtol * 0.1, rtol=4 * np.finfo(float).eps)
    return math.exp(z)


def monotone_inverse(func, targets: np.ndarray, rtol: float = 1e-12, max_iter: int = 200) -> np.ndarray:
    """Vectorised inverse of an increasing bijection of [0, inf) onto itself.

    Solves ``func(t) = targets`` elementwise by bracketing (doubling or
    halving from t = 1) followed by geometric bisection.
    """
    v = np.asarray(targets, dtype=float)
    out = np.zeros_like(v)
    mask = v > 0
    if not np.any(mask):
        return out
    tv = v[mask]
    lo = np.ones_like(tv)
    hi = np.ones_like(tv)
    val = func(lo, mask)
    up = val < tv
    for _ in range(2100):
        if not np.any(up):
            break
        hi = np.where(up, hi * 2.0, hi)
        lo = np.where(up, hi / 2.0, lo)
        up = up & (func(hi, mask) < tv)
    down = val >= tv
    for _ in range(2100):
        if not np.any(down):
            break
        lo = np.where(down, lo * 0.5, lo)
        hi = np.where(down, lo * 2.0, hi)
        down = down & (func(lo, mask) >= tv)
    for _ in range(max_iter):
        if np.all(hi / lo - 1.0 <= rtol):
            break
        mid = np.sqrt(lo * hi)
        below = func(mid, mask) < tv
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    out[mask] = np.sqrt(lo * hi)
    return out


def halton(n: int, dim: int, skip: int = 20) -> np.ndarray:
    """First ``n`` points of the Halton sequence in [0, 1)^dim."""
    primes = [2, 3, 5, 7, 11, 13][:dim]
    out = np.empty((n, dim))
    idx = np.arange(skip + 1, skip + n + 1)
    for j, base in enumerate(primes):
        f = np.ones(n)
        r = np.zeros(n)
        k = idx.copy()
        while np.any(k > 0):
            f = f / base
            r = r + f * (k % base)
            k = k // base
        out[:, j] = r
    return out
