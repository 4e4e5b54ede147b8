"""Quadrature rules and backend selection for the spherical-simplex kernels.

The compiled extension (`minktens._quad_fast`, built from Cython) and the
numpy fallback implement the same recursion; whichever is importable wins,
with the environment variable MINKTENS_FORCE_PY=1 forcing the fallback.
Both backends receive the rule tables from here, so they integrate with the
same nodes and weights.
"""

from __future__ import annotations

import os

import numpy as np
from scipy.special import roots_jacobi

from . import _quad_py


def _rule_chord():
    # 3-point Gauss-Legendre on the segment, degree 5
    x, w = np.polynomial.legendre.leggauss(3)
    t = (x + 1.0) / 2.0
    bary = np.column_stack([1.0 - t, t])
    return bary, w / 2.0


def _rule_triangle():
    # 7-point degree-5 rule (centroid + two 3-orbits)
    a1, w1 = 0.0597158717897698, 0.1323941527885062
    a2, w2 = 0.7974269853530873, 0.1259391805448271
    b1 = (1.0 - a1) / 2.0
    b2 = (1.0 - a2) / 2.0
    bary = np.array(
        [
            [1 / 3, 1 / 3, 1 / 3],
            [a1, b1, b1],
            [b1, a1, b1],
            [b1, b1, a1],
            [a2, b2, b2],
            [b2, a2, b2],
            [b2, b2, a2],
        ]
    )
    weights = np.array([0.225, w1, w1, w1, w2, w2, w2])
    return bary, weights


def _rule_tetrahedron():
    # conical-product rule, 3 Gauss-Jacobi points per axis, degree 5
    pts, wts = [], []
    axes = []
    for alpha in (2, 1, 0):
        x, w = roots_jacobi(3, alpha, 0)
        t = (x + 1.0) / 2.0
        w = w / np.sum(w)  # normalized against the (1-t)^alpha weight mass
        axes.append((t, w))
    for i, (t1, w1) in enumerate(zip(*axes[0])):
        for j, (t2, w2) in enumerate(zip(*axes[1])):
            for k, (t3, w3) in enumerate(zip(*axes[2])):
                x1 = t1
                x2 = t2 * (1.0 - t1)
                x3 = t3 * (1.0 - t1) * (1.0 - t2)
                x0 = 1.0 - x1 - x2 - x3
                pts.append([x0, x1, x2, x3])
                wts.append(w1 * w2 * w3)
    return np.array(pts), np.array(wts)


_RULES = {2: _rule_chord(), 3: _rule_triangle(), 4: _rule_tetrahedron()}


def rule(m):
    """(barycentric points, weights) pair for spherical (m-1)-simplices."""
    return _RULES[m]


if os.environ.get("MINKTENS_FORCE_PY") == "1":
    _backend = _quad_py
else:
    try:
        from . import _quad_fast as _backend  # type: ignore[attr-defined]
    except ImportError:
        _backend = _quad_py

BACKEND = _backend.BACKEND


def integrate_spherical_simplices(verts, exps, tol, max_depth=26, backend=None):
    """Adaptively integrate all monomials u^alpha over a union of simplices.

    verts: (B, m, m) unit vertex rows, m in {2, 3, 4}; exps: (t, m).
    Returns the (t,) vector of integrals with total absolute error <= tol.
    """
    verts = np.ascontiguousarray(verts, dtype=float)
    exps = np.ascontiguousarray(exps, dtype=np.int64)
    if verts.ndim != 3 or verts.shape[1] != verts.shape[2]:
        raise ValueError(f"expected (B, m, m) vertex array, got {verts.shape}")
    m = verts.shape[1]
    bary, weights = rule(m)
    impl = _backend if backend is None else backend
    return impl.integrate_spherical_simplices(verts, exps, bary, weights, tol, max_depth)


def backends():
    """Mapping of available backend names to modules (for the benchmark)."""
    table = {"python": _quad_py}
    try:
        from . import _quad_fast

        table["cython"] = _quad_fast
    except ImportError:
        pass
    return table
