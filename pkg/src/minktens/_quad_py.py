"""Pure-numpy adaptive quadrature over spherical simplices.

A spherical (m-1)-simplex in S^{m-1} is described by its m unit vertices.  The
rule evaluates the flat simplex spanned by the vertices with a fixed-order
quadrature and maps points radially onto the sphere with the Jacobian
c / |x|^m, where c is the distance from the origin to the affine hull.
Adaptive refinement splits every edge at the geodesic midpoint (2, 4 or 8
children for m = 2, 3, 4) and accepts a node when the parent estimate and the
child sum agree within the node's error budget; budgets are divided evenly
among children so the total error stays below the requested tolerance.

Batches are processed breadth-first with the children kept in a fixed order,
so results are deterministic for fixed inputs.
"""

from __future__ import annotations

import numpy as np

_CHUNK = 65536  # cap on simplices per vectorized rule evaluation

# The fixed rules have degree 5, so the child sum is ~64x more accurate than
# the parent estimate and |parent - children| overstates the remaining error
# by a factor ~63.  Accepting at ACCEPT_FACTOR * budget keeps the true error
# within budget while saving one to two refinement levels.
ACCEPT_FACTOR = 30.0

# child vertex index pairs (i, j) -> midpoint of v_i, v_j; i == j keeps v_i
_SUBDIV = {
    2: [((0, 0), (0, 1)), ((0, 1), (1, 1))],
    3: [
        ((0, 0), (0, 1), (0, 2)),
        ((0, 1), (1, 1), (1, 2)),
        ((0, 2), (1, 2), (2, 2)),
        ((0, 1), (1, 2), (0, 2)),
    ],
    4: [
        ((0, 0), (0, 1), (0, 2), (0, 3)),
        ((0, 1), (1, 1), (1, 2), (1, 3)),
        ((0, 2), (1, 2), (2, 2), (2, 3)),
        ((0, 3), (1, 3), (2, 3), (3, 3)),
        # central octahedron, split along the (m01, m23) diagonal
        ((0, 1), (2, 3), (0, 2), (0, 3)),
        ((0, 1), (2, 3), (0, 3), (1, 3)),
        ((0, 1), (2, 3), (1, 3), (1, 2)),
        ((0, 1), (2, 3), (1, 2), (0, 2)),
    ],
}


def _geometry(v):
    """(volume, plane distance) of the flat simplices in a batch (B, m, m)."""
    m = v.shape[1]
    if m == 2:
        d = v[:, 1, :] - v[:, 0, :]
        vol = np.linalg.norm(d, axis=1)
        nrm = np.stack([-d[:, 1], d[:, 0]], axis=1)
    elif m == 3:
        e1 = v[:, 1, :] - v[:, 0, :]
        e2 = v[:, 2, :] - v[:, 0, :]
        nrm = np.cross(e1, e2)
        vol = np.linalg.norm(nrm, axis=1) / 2.0
    else:
        edges = v[:, 1:, :] - v[:, :1, :]
        gram = np.einsum("bik,bjk->bij", edges, edges)
        vol = np.sqrt(np.maximum(np.linalg.det(gram), 0.0)) / _factorial(m - 1)
        ok = np.abs(np.linalg.det(v)) > 1e-300
        h = np.zeros((v.shape[0], m))
        if ok.any():
            rhs = np.ones((int(ok.sum()), m, 1))
            h[ok] = np.linalg.solve(v[ok], rhs)[:, :, 0]
        hn = np.linalg.norm(h, axis=1)
        c = np.where(hn > 0, 1.0 / np.where(hn > 0, hn, 1.0), 0.0)
        return np.where(ok, vol, 0.0), c
    nn = np.linalg.norm(nrm, axis=1)
    safe = nn > 1e-300
    c = np.where(safe, np.abs(np.einsum("bd,bd->b", v[:, 0, :], nrm)) / np.where(safe, nn, 1.0), 0.0)
    return np.where(safe, vol, 0.0), c


def _rule_values(verts, exps, bary, weights):
    """Fixed-rule estimates of the monomial integrals on a batch of simplices.

    verts: (B, m, m); exps: (t, m); bary: (q, m); weights: (q,).
    Returns (B, t).
    """
    b, m, _ = verts.shape
    out = np.empty((b, exps.shape[0]))
    for lo in range(0, b, _CHUNK):
        v = verts[lo:lo + _CHUNK]
        x = np.einsum("qm,bmd->bqd", bary, v)
        r = np.linalg.norm(x, axis=2)
        u = x / r[:, :, None]
        mono = np.ones((v.shape[0], bary.shape[0], exps.shape[0]))
        for d in range(m):
            mono *= u[:, :, d, None] ** exps[None, None, :, d]
        vol, c = _geometry(v)
        jac = c[:, None] / r ** m
        out[lo:lo + _CHUNK] = np.einsum("q,bq,bqt->bt", weights, jac, mono) * vol[:, None]
    return out


def _factorial(k):
    out = 1
    for i in range(2, k + 1):
        out *= i
    return out


def _subdivide(verts):
    """All children of a batch, stacked as (B * n_children, m, m)."""
    b, m, _ = verts.shape
    plan = _SUBDIV[m]
    children = np.empty((b, len(plan), m, m))
    for ci, spec in enumerate(plan):
        for vi, (i, j) in enumerate(spec):
            if i == j:
                children[:, ci, vi, :] = verts[:, i, :]
            else:
                mid = verts[:, i, :] + verts[:, j, :]
                mid /= np.linalg.norm(mid, axis=1)[:, None]
                children[:, ci, vi, :] = mid
    return children.reshape(b * len(plan), m, m)


def integrate_spherical_simplices(verts, exps, bary, weights, tol, max_depth=26):
    """Sum of integral(u^alpha) over a list of spherical simplices.

    verts: (B, m, m) unit vertex rows; exps: (t, m) exponents;
    bary/weights: the fixed rule in barycentric coordinates (weights sum to 1).
    Returns a (t,) vector.  `tol` is the total absolute error budget.
    """
    verts = np.ascontiguousarray(verts, dtype=float)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    if verts.shape[0] == 0:
        return np.zeros(exps.shape[0])
    m = verts.shape[1]
    nchild = len(_SUBDIV[m])
    total = np.zeros(exps.shape[0])
    vals = _rule_values(verts, exps, bary, weights)
    budget = np.full(verts.shape[0], tol / verts.shape[0])
    for _ in range(max_depth):
        children = _subdivide(verts)
        cvals = _rule_values(children, exps, bary, weights)
        csum = cvals.reshape(verts.shape[0], nchild, -1).sum(axis=1)
        err = np.abs(vals - csum).max(axis=1)
        done = err <= ACCEPT_FACTOR * budget
        if done.any():
            total += csum[done].sum(axis=0)
        if done.all():
            return total
        keep = ~done
        idx = np.repeat(keep, nchild)
        verts = children[idx]
        vals = cvals[idx]
        budget = np.repeat(budget[keep] / nchild, nchild)
    # depth limit: accept the current refinement (smooth integrands never get here)
    total += vals.sum(axis=0)
    return total


BACKEND = "python"
