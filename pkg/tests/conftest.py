"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the library's own integration paths:
box moments come from products of one-dimensional power integrals, simplex
moments from brute-force expansion of the barycentric parametrization, and
spherical polygon areas from the angle-excess formula.
"""

import itertools
import math

import numpy as np
import pytest

from minktens.polytopes import build_polytope


@pytest.fixture(scope="session")
def cube():
    return build_polytope([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)])


@pytest.fixture(scope="session")
def square():
    return build_polytope([[0, 0], [1, 0], [0, 1], [1, 1]])


@pytest.fixture(scope="session")
def segment2():
    return build_polytope([[0.0, 0.0], [1.0, 0.0]])


def coeff_residual(a, b):
    keys = set(a.coeffs) | set(b.coeffs)
    if not keys:
        return 0.0
    return max(abs(a.coeffs.get(k, 0.0) - b.coeffs.get(k, 0.0)) for k in keys)


def box_monomial_integral(lo, hi, alpha):
    """Exact integral of prod x_i^{alpha_i} over an axis box (1-d products)."""
    total = 1.0
    for a, b, e in zip(lo, hi, alpha):
        total *= (b ** (e + 1) - a ** (e + 1)) / (e + 1)
    return total


def brute_simplex_monomial(verts, alpha):
    """Exact integral of x^alpha over a simplex by expanding x = sum lam_i v_i
    factor by factor and applying the Dirichlet moment formula."""
    verts = np.asarray(verts, dtype=float)
    k = verts.shape[0] - 1
    coords = [d for d, a in enumerate(alpha) for _ in range(int(a))]
    r = len(coords)
    edges = verts[1:] - verts[:1]
    vol = math.sqrt(max(np.linalg.det(edges @ edges.T), 0.0)) / math.factorial(k) if k else 1.0
    total = 0.0
    for assign in itertools.product(range(k + 1), repeat=r):
        lam = [0] * (k + 1)
        prod = 1.0
        for pos, vi in enumerate(assign):
            lam[vi] += 1
            prod *= verts[vi][coords[pos]]
        weight = 1.0
        for c in lam:
            weight *= math.factorial(c)
        total += prod * weight / math.factorial(r + k)
    return total * vol * math.factorial(k)


def girard_area(vertices):
    """Area of a geodesically convex spherical polygon on S^2 from the angle
    excess; vertices must be in cyclic boundary order."""
    verts = [np.asarray(v, dtype=float) for v in vertices]
    t = len(verts)
    total = 0.0
    for i in range(t):
        a, b, c = verts[(i - 1) % t], verts[i], verts[(i + 1) % t]
        ta = a - np.dot(a, b) * b
        tc = c - np.dot(c, b) * b
        ta /= np.linalg.norm(ta)
        tc /= np.linalg.norm(tc)
        total += math.acos(min(1.0, max(-1.0, float(np.dot(ta, tc)))))
    return total - (t - 2) * math.pi
