"""Pair quadrature rules for integrals over Q = (Omega x Omega) u 2 (Omega x C Omega).

Every rule is a list of point pairs ``(x, y)`` with positive weights that
already include the singular factor ``|x - y|^(-N)`` and the pair
multiplicity, so that

    int_Q F(x, y) dmu  ~=  sum_k w_k F(x_k, y_k)

for integrands symmetric in ``(x, y)`` that vanish when both points are
outside the domain. Positivity of the weights makes every pointwise
inequality between integrands carry over exactly to the discrete sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from ._numerics import gauss01, graded01, triangle_rule


@dataclass
class PairRule:
    x: np.ndarray
    y: np.ndarray
    y_kernel: np.ndarray
    r: np.ndarray
    w: np.ndarray
    D: sparse.csr_matrix
    in_omega: np.ndarray
    margin: float

    @property
    def size(self) -> int:
        return len(self.w)


class _Acc:
    """Collects pair blocks: x/y points, weights, and P1 cell data for both ends."""

    def __init__(self, dim):
        self.dim = dim
        self.blocks = []

    def add(self, x, y, w, xc, xb, yc, yb):
        n = len(w)
        if n == 0:
            return
        k = self.dim + 1
        self.blocks.append((
            np.asarray(x, float).reshape(n, self.dim),
            np.asarray(y, float).reshape(n, self.dim),
            np.asarray(w, float).reshape(n),
            np.broadcast_to(xc, (n,)).astype(np.int64),
            np.asarray(xb, float).reshape(n, k),
            np.broadcast_to(yc, (n,)).astype(np.int64),
            np.asarray(yb, float).reshape(n, k),
        ))

    def finish(self, mesh, margin):
        x, y, w, xc, xb, yc, yb = (np.concatenate(a) for a in zip(*self.blocks))
        r = np.linalg.norm(x - y, axis=1)
        keep = (w > 0) & (r > 0)
        x, y, w, xc, xb, yc, yb, r = (a[keep] for a in (x, y, w, xc, xb, yc, yb, r))
        dof = -np.ones(mesh.n_vertices, dtype=np.int64)
        dof[mesh.interior] = np.arange(mesh.n_dofs)
        n = len(w)
        k = mesh.dim + 1
        rows, cols, vals = [], [], []
        xd = dof[mesh.cells[xc]]
        rows.append(np.repeat(np.arange(n), k))
        cols.append(xd.ravel())
        vals.append(xb.ravel())
        ext = yc < 0
        yd = np.where(ext[:, None], -1, dof[mesh.cells[np.maximum(yc, 0)]])
        rows.append(np.repeat(np.arange(n), k))
        cols.append(yd.ravel())
        vals.append(-yb.ravel())
        rows, cols, vals = (np.concatenate(a) for a in (rows, cols, vals))
        ok = cols >= 0
        D = sparse.csr_matrix((vals[ok], (rows[ok], cols[ok])), shape=(n, mesh.n_dofs))
        D.sum_duplicates()
        y_kernel = np.clip(y, mesh.lower, mesh.upper)
        return PairRule(x, y, y_kernel, r, w, D, ~ext, margin)


def _exterior_margin(mesh, R):
    return R - 0.5 * float(np.min(mesh.upper - mesh.lower))


def _ring_widths(h0, margin):
    widths, total, k = [], 0.0, 0
    while total < margin * (1 - 1e-12):
        w = min(h0 * 2.0**k, margin - total)
        widths.append(w)
        total += w
        k += 1
    return widths


# ---------------------------------------------------------------------------
# one dimension


def _sep_1d(acc, xa, xb, ya, yb, order, far_order, far_ratio, mult, xcell, ycell, cell_a, cell_h):
    """Tensor Gauss on [xa, xb] x [ya, yb], halving the longer side while the gap is small."""
    stack = [(xa, xb, ya, yb)]
    while stack:
        a, b, c, d = stack.pop()
        gap = max(c - b, a - d)
        size = max(b - a, d - c)
        if gap < size * 0.999:
            if b - a >= d - c:
                m = 0.5 * (a + b)
                stack += [(a, m, c, d), (m, b, c, d)]
            else:
                m = 0.5 * (c + d)
                stack += [(a, b, c, m), (a, b, m, d)]
            continue
        n = far_order if gap >= far_ratio * size else order
        g, gw = gauss01(n)
        X = a + (b - a) * g
        Y = c + (d - c) * g
        XX, YY = np.meshgrid(X, Y, indexing="ij")
        W = mult * np.outer((b - a) * gw, (d - c) * gw) / np.abs(XX - YY)
        _emit_1d(acc, XX.ravel(), YY.ravel(), W.ravel(), xcell, ycell, cell_a, cell_h)


def _emit_1d(acc, X, Y, W, xcell, ycell, cell_a, cell_h):
    lx = (X - cell_a[xcell]) / cell_h[xcell]
    xb = np.column_stack([1 - lx, lx])
    if ycell >= 0:
        ly = (Y - cell_a[ycell]) / cell_h[ycell]
        yb = np.column_stack([1 - ly, ly])
    else:
        yb = np.zeros((len(Y), 2))
    acc.add(X[:, None], Y[:, None], W, xcell, xb, ycell, yb)


def _corner_1d(A, B, g, levels):
    """Pairs x = b - s1, y = b + s2 with s1 in [0, A], s2 in [0, B]; weights include 1/r."""
    rho, wr = graded01(g, levels)
    tau, wt = gauss01(g)
    R, T = np.meshgrid(rho, tau, indexing="ij")
    WR, WT = np.meshgrid(wr, wt, indexing="ij")
    s1a, s2a = A * R, B * R * T
    wa = A * B * WR * WT / (A + B * T)
    s2b, s1b = B * R, A * R * T
    wb = A * B * WR * WT / (B + A * T)
    return np.concatenate([s1a.ravel(), s1b.ravel()]), np.concatenate([s2a.ravel(), s2b.ravel()]), np.concatenate([wa.ravel(), wb.ravel()])


def build_1d(mesh, qc, R):
    acc = _Acc(1)
    g, L = qc.gauss_order, qc.near_levels
    fo, fr = qc.far_order, qc.far_field_ratio
    v = mesh.vertices[:, 0]
    a = v[mesh.cells[:, 0]]
    b = v[mesh.cells[:, 1]]
    h = b - a
    n = len(a)

    # identical cells: Duffy map on the half y < x, doubled
    xi, wxi = graded01(g, L)
    eta, weta = graded01(g, L)
    XI, ETA = np.meshgrid(xi, eta, indexing="ij")
    WW = np.outer(wxi, weta)
    for j in range(n):
        X = a[j] + h[j] * XI
        Y = X - h[j] * XI * ETA
        W = 2.0 * h[j] * WW / ETA
        _emit_1d(acc, X.ravel(), Y.ravel(), W.ravel(), j, j, a, h)

    # touching interior cells j, j+1
    for j in range(n - 1):
        s1, s2, w = _corner_1d(h[j], h[j + 1], g, L)
        _emit_1d(acc, b[j] - s1, b[j] + s2, 2.0 * w, j, j + 1, a, h)

    # separated interior cells
    for j in range(n):
        for k in range(j + 2, n):
            _sep_1d(acc, a[j], b[j], a[k], b[k], g, fo, fr, 2.0, j, k, a, h)

    # exterior: graded cells out to the truncation margin
    margin = _exterior_margin(mesh, R)
    widths = _ring_widths(float(h.min()), margin)
    edges = np.concatenate([[0.0], np.cumsum(widths)])
    lo, hi = float(mesh.lower[0]), float(mesh.upper[0])
    for side in (-1, 1):
        for e0, e1 in zip(edges[:-1], edges[1:]):
            if side > 0:
                ea, eb = hi + e0, hi + e1
            else:
                ea, eb = lo - e1, lo - e0
            for j in range(n):
                touching = (side > 0 and j == n - 1 and e0 == 0.0) or (side < 0 and j == 0 and e0 == 0.0)
                if touching:
                    s1, s2, w = _corner_1d(h[j], eb - ea, g, L)
                    if side > 0:
                        X, Y = b[j] - s1, hi + s2
                    else:
                        X, Y = a[j] + s1, lo - s2
                    _emit_1d(acc, X, Y, 2.0 * w, j, -1, a, h)
                else:
                    _sep_1d(acc, a[j], b[j], ea, eb, g, fo, fr, 2.0, j, -1, a, h)
    return acc.finish(mesh, margin)


# ---------------------------------------------------------------------------
# two dimensions


def _cross(a, b):
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def _polar_inside(X, P, g, levels):
    """Polar rule about X over convex polygons P (X inside); weights include 1/r^2."""
    b, V, _ = P.shape
    gt, gwt = gauss01(g)
    t, wt = graded01(g, levels)
    Ys, Ws = [], []
    for k in range(V):
        A, B = P[:, k], P[:, (k + 1) % V]
        tha = np.arctan2(A[:, 1] - X[:, 1], A[:, 0] - X[:, 0])
        thb = np.arctan2(B[:, 1] - X[:, 1], B[:, 0] - X[:, 0])
        dth = np.mod(thb - tha, 2 * np.pi)
        theta = tha[:, None] + dth[:, None] * gt[None, :]
        d = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        E = (B - A)[:, None, :]
        Rr = _cross((A - X)[:, None, :], E) / _cross(d, E)
        r = Rr[:, :, None] * t[None, None, :]
        Y = X[:, None, None, :] + r[..., None] * d[:, :, None, :]
        W = (dth[:, None] * gwt[None, :])[:, :, None] * (wt / t)[None, None, :]
        Ys.append(Y.reshape(b, -1, 2))
        Ws.append(W.reshape(b, -1))
    return np.concatenate(Ys, axis=1), np.concatenate(Ws, axis=1)


def _polar_outside(X, P, g, panels=2):
    """Polar rule about X over convex polygons P with X strictly outside.

    Sectors are delimited by the vertex directions; along each ray the
    radial integral of dr / r is done in log r.
    """
    b, V, _ = P.shape
    gt, gwt = gauss01(g)
    gr, gwr = gauss01(g)
    c = P.mean(axis=1)
    ref = np.arctan2(c[:, 1] - X[:, 1], c[:, 0] - X[:, 0])
    ang = np.arctan2(P[..., 1] - X[:, None, 1], P[..., 0] - X[:, None, 0])
    rel = np.mod(ang - ref[:, None] + np.pi, 2 * np.pi) - np.pi
    rel = np.sort(rel, axis=1)
    Ys, Ws = [], []
    for k in range(V - 1):
        t0, t1 = rel[:, k], rel[:, k + 1]
        dth = t1 - t0
        theta = ref[:, None] + t0[:, None] + dth[:, None] * gt[None, :]
        d = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        hits = []
        for e in range(V):
            A, B = P[:, e], P[:, (e + 1) % V]
            E = (B - A)[:, None, :]
            den = _cross(d, E)
            safe = np.where(np.abs(den) > 1e-300, den, 1.0)
            AX = (A - X)[:, None, :]
            r = _cross(AX, E) / safe
            mu = _cross(AX, d) / safe
            ok = (np.abs(den) > 1e-14 * np.linalg.norm(E, axis=-1)) & (mu >= -1e-12) & (mu <= 1 + 1e-12) & (r > 0)
            hits.append(np.where(ok, r, np.nan))
        H = np.stack(hits, axis=-1)
        r_in = np.nanmin(H, axis=-1)
        r_out = np.nanmax(H, axis=-1)
        lin, lout = np.log(r_in), np.log(r_out)
        edges = lin[..., None] + (lout - lin)[..., None] * np.linspace(0, 1, panels + 1)
        rho = (edges[..., :-1, None] + (edges[..., 1:] - edges[..., :-1])[..., None] * gr).reshape(b, g, -1)
        wrho = (((edges[..., 1:] - edges[..., :-1])[..., None]) * gwr).reshape(b, g, -1)
        r = np.exp(rho)
        Y = X[:, None, None, :] + r[..., None] * d[:, :, None, :]
        W = (dth[:, None] * gwt[None, :])[:, :, None] * wrho
        Ys.append(Y.reshape(b, -1, 2))
        Ws.append(W.reshape(b, -1))
    Y = np.concatenate(Ys, axis=1)
    W = np.concatenate(Ws, axis=1)
    return Y, np.nan_to_num(W, nan=0.0)


def _bary_in(T, Y):
    """Barycentric coordinates of points Y (b, m, 2) in triangles T (b, 3, 2)."""
    e1 = T[:, 1] - T[:, 0]
    e2 = T[:, 2] - T[:, 0]
    det = _cross(e1, e2)
    d = Y - T[:, None, 0]
    l1 = _cross(d, e2[:, None, :]) / det[:, None]
    l2 = _cross(e1[:, None, :], d) / det[:, None]
    return np.stack([1 - l1 - l2, l1, l2], axis=-1)


def _tri_points(T, bq):
    return np.einsum("qk,bkd->bqd", bq, T)


def _rects(mesh, margin):
    lo, hi = mesh.lower.astype(float), mesh.upper.astype(float)
    h0 = float(np.min(mesh.h))
    widths = _ring_widths(h0, margin)
    out = []
    m = 0.0
    for k, w in enumerate(widths):
        blo, bhi = lo - m, hi + m
        for axis in (0, 1):
            other = 1 - axis
            length = bhi[axis] - blo[axis]
            nseg = mesh.cells_per_axis[axis] if k == 0 else max(1, int(math.ceil(length / w - 1e-9)))
            cuts = np.linspace(blo[axis], bhi[axis], nseg + 1)
            for side in (0, 1):
                if side == 0:
                    s0, s1 = blo[other] - w, blo[other]
                else:
                    s0, s1 = bhi[other], bhi[other] + w
                for c0, c1 in zip(cuts[:-1], cuts[1:]):
                    if axis == 0:
                        out.append([[c0, s0], [c1, s0], [c1, s1], [c0, s1]])
                    else:
                        out.append([[s0, c0], [s1, c0], [s1, c1], [s0, c1]])
        for cx in (blo[0] - w, bhi[0]):
            for cy in (blo[1] - w, bhi[1]):
                out.append([[cx, cy], [cx + w, cy], [cx + w, cy + w], [cx, cy + w]])
        m += w
    return np.array(out, dtype=float)


def _touching_pairs(mesh):
    nt = len(mesh.cells)
    inc = sparse.csr_matrix(
        (np.ones(mesh.cells.size), (np.repeat(np.arange(nt), 3), mesh.cells.ravel())),
        shape=(nt, mesh.n_vertices),
    )
    S = (inc @ inc.T).tocoo()
    return S.row, S.col, S.data.astype(int)


def build_2d(mesh, qc, R):
    acc = _Acc(2)
    g, L = qc.gauss_order, qc.near_levels
    fo, fr = qc.far_order, qc.far_field_ratio
    T = mesh.vertices[mesh.cells]
    nt = len(T)
    cent = T.mean(axis=1)
    diam = np.max(np.linalg.norm(T[:, [0, 1, 2]] - T[:, [1, 2, 0]], axis=-1), axis=1)
    bq, bw = triangle_rule(g)
    vol = mesh.volumes
    ids = np.arange(nt)

    def emit(xc, xb, Xp, yc, yb, Yp, W):
        b, m = W.shape
        acc.add(Xp.reshape(-1, 2), Yp.reshape(-1, 2), W.ravel(),
                np.repeat(xc, m), xb.reshape(-1, 3), np.repeat(yc, m), yb.reshape(-1, 3))

    # identical triangles: x rule times polar rule about x inside the triangle
    Xq = _tri_points(T, bq)
    nq = len(bw)
    Xf = Xq.reshape(-1, 2)
    Tf = np.repeat(T, nq, axis=0)
    Y, W = _polar_inside(Xf, Tf, g, L)
    W = W * np.repeat(vol[:, None] * bw[None, :], 1, axis=0).reshape(-1)[:, None]
    m = Y.shape[1]
    yb = _bary_in(Tf, Y)
    xb = np.repeat(np.broadcast_to(bq, (nt, nq, 3)).reshape(-1, 3), m, axis=0)
    acc.add(np.repeat(Xf, m, axis=0), Y.reshape(-1, 2), W.ravel(),
            np.repeat(np.repeat(ids, nq), m), xb, np.repeat(np.repeat(ids, nq), m), yb.reshape(-1, 3))

    # pair classification for distinct triangles i < j
    ri, rj, shared = _touching_pairs(mesh)
    sel = ri < rj
    ri, rj, shared = ri[sel], rj[sel], shared[sel]
    edge = shared == 2
    vert = shared == 1

    # edge neighbours: x rule on i, polar rule on j, doubled
    if np.any(edge):
        I, J = ri[edge], rj[edge]
        Xp = _tri_points(T[I], bq).reshape(-1, 2)
        Pj = np.repeat(T[J], nq, axis=0)
        Y, W = _polar_outside(Xp, Pj, g)
        W = 2.0 * W * np.repeat(vol[I][:, None] * bw[None, :], 1).reshape(-1)[:, None]
        m = Y.shape[1]
        yb = _bary_in(Pj, Y)
        xb = np.repeat(np.tile(bq, (len(I), 1)), m, axis=0)
        acc.add(np.repeat(Xp, m, axis=0), Y.reshape(-1, 2), W.ravel(),
                np.repeat(np.repeat(I, nq), m), xb, np.repeat(np.repeat(J, nq), m), yb.reshape(-1, 3))

    # vertex neighbours and separated pairs: tensor rules
    touching = np.zeros((nt, nt), dtype=bool) if nt <= 4096 else None
    pairs_i, pairs_j = [ri[vert]], [rj[vert]]
    near_flags = [np.ones(vert.sum(), dtype=bool)]
    ii, jj = np.triu_indices(nt, k=1)
    if touching is not None:
        touching[ri, rj] = True
        mask = ~touching[ii, jj]
    else:  # pragma: no cover - very large meshes
        key = set(zip(ri.tolist(), rj.tolist()))
        mask = np.array([(a, b) not in key for a, b in zip(ii, jj)])
    ii, jj = ii[mask], jj[mask]
    dc = np.linalg.norm(cent[ii] - cent[jj], axis=1)
    near = dc < fr * np.maximum(diam[ii], diam[jj])
    pairs_i.append(ii)
    pairs_j.append(jj)
    near_flags.append(near)
    I = np.concatenate(pairs_i)
    J = np.concatenate(pairs_j)
    NEAR = np.concatenate(near_flags)
    for flag, order in ((True, g), (False, fo)):
        s = NEAR == flag
        if not np.any(s):
            continue
        q, qw = triangle_rule(order)
        _tensor_tt(acc, T, vol, I[s], J[s], q, qw)

    # exterior rectangles
    margin = _exterior_margin(mesh, R)
    rects = _rects(mesh, margin)
    ne = len(rects)
    rc = rects.mean(axis=1)
    rsize = np.linalg.norm(rects[:, 2] - rects[:, 0], axis=1)
    rlo, rhi = rects[:, 0], rects[:, 2]
    # distance of every triangle vertex to every rectangle
    vx = T.reshape(-1, 2)
    dx = np.maximum(np.maximum(rlo[None, :, 0] - vx[:, None, 0], vx[:, None, 0] - rhi[None, :, 0]), 0)
    dy = np.maximum(np.maximum(rlo[None, :, 1] - vx[:, None, 1], vx[:, None, 1] - rhi[None, :, 1]), 0)
    dist = np.hypot(dx, dy).reshape(nt, 3, ne).min(axis=1)
    tiny = 1e-12 * mesh.diam
    ti, ei = np.nonzero(dist <= tiny)
    if len(ti):
        Xp = _tri_points(T[ti], bq).reshape(-1, 2)
        Pe = np.repeat(rects[ei], nq, axis=0)
        Y, W = _polar_outside(Xp, Pe, g)
        W = 2.0 * W * (vol[ti][:, None] * bw[None, :]).reshape(-1)[:, None]
        m = Y.shape[1]
        xb = np.repeat(np.tile(bq, (len(ti), 1)), m, axis=0)
        acc.add(np.repeat(Xp, m, axis=0), Y.reshape(-1, 2), W.ravel(),
                np.repeat(np.repeat(ti, nq), m), xb, -1, np.zeros((len(W.ravel()), 3)))
    tt, ee = np.nonzero(dist > tiny)
    dce = np.linalg.norm(cent[tt] - rc[ee], axis=1)
    # each side gets the high order only when it is large relative to the distance
    xo = np.where(dce < fr * diam[tt], g, fo)
    yo = np.where(dce < fr * rsize[ee], g, fo)
    for ox in sorted({g, fo}):
        for oy in sorted({g, fo}):
            s = (xo == ox) & (yo == oy)
            if np.any(s):
                _tensor_te(acc, T, vol, rects, tt[s], ee[s], ox, oy)
    return acc.finish(mesh, margin)


def _tensor_tt(acc, T, vol, I, J, q, qw, chunk=200000):
    nq = len(qw)
    for start in range(0, len(I), chunk):
        a, b = I[start:start + chunk], J[start:start + chunk]
        Xp = _tri_points(T[a], q)
        Yp = _tri_points(T[b], q)
        X = np.repeat(Xp, nq, axis=1)
        Y = np.tile(Yp, (1, nq, 1))
        r = np.linalg.norm(X - Y, axis=-1)
        W = 2.0 * (vol[a] * vol[b])[:, None] * np.outer(qw, qw).ravel()[None, :] / r**2
        m = nq * nq
        xb = np.tile(np.repeat(q, nq, axis=0), (len(a), 1))
        yb = np.tile(np.tile(q, (nq, 1)), (len(a), 1))
        acc.add(X.reshape(-1, 2), Y.reshape(-1, 2), W.ravel(), np.repeat(a, m), xb, np.repeat(b, m), yb)


def _tensor_te(acc, T, vol, rects, I, E, x_order, y_order):
    q, qw = triangle_rule(x_order)
    g, gw = gauss01(y_order)
    nq = len(qw)
    U, Vv = np.meshgrid(g, g, indexing="ij")
    WU = np.outer(gw, gw).ravel()
    lo = rects[E, 0]
    size = rects[E, 2] - rects[E, 0]
    Yp = lo[:, None, :] + size[:, None, :] * np.stack([U.ravel(), Vv.ravel()], axis=-1)[None]
    Wy = (size[:, 0] * size[:, 1])[:, None] * WU[None, :]
    ny = Yp.shape[1]
    Xp = _tri_points(T[I], q)
    X = np.repeat(Xp, ny, axis=1)
    Y = np.tile(Yp, (1, nq, 1))
    Wx = vol[I][:, None] * qw[None, :]
    W = 2.0 * (Wx[:, :, None] * Wy[:, None, :]).reshape(len(I), -1)
    r = np.linalg.norm(X - Y, axis=-1)
    W = W / r**2
    m = nq * ny
    xb = np.tile(np.repeat(q, ny, axis=0), (len(I), 1))
    acc.add(X.reshape(-1, 2), Y.reshape(-1, 2), W.ravel(), np.repeat(I, m), xb, -1, np.zeros((len(I) * m, 3)))


def build(mesh, qc, R) -> PairRule:
    if mesh.dim == 1:
        return build_1d(mesh, qc, R)
    return build_2d(mesh, qc, R)
