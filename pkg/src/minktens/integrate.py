"""Measures and moments: exact integrals of tensor monomials over polytope
regions and spherical cone regions.

Spherical regions are intersections of a sphere S_V (V a subspace of R^n,
the "carrier") with a polyhedral cone inside V.  Their dimension is
V.dim - 1; intersections that degenerate to lower dimension carry measure
zero by fiat, except in the point case V.dim == 1 where the counting measure
applies.  Integration dispatches on the carrier dimension:

  V.dim == 1   weighted point sums (exact),
  V.dim == 2   circular arcs via closed-form trigonometric antiderivatives,
  V.dim >= 3   fan decomposition into spherical simplices plus adaptive
               subdivision quadrature (minktens._quad).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _quad
from .symtensor import (
    SymTensor,
    Subspace,
    pullback,
    sym_product,
    vector_power,
)

__all__ = [
    "omega",
    "QuadratureConfig",
    "SphericalRegion",
    "CrossWith",
    "PerpComplement",
    "spherical_moment",
    "spherical_measure",
    "arc_mixed_spherical_moment",
    "intersect_with_cone",
    "polytope_moment",
    "simplex_moment",
    "clear_cache",
]

_TOL = 1e-12


def omega(n):
    """Surface measure of the unit sphere in R^n: 2 pi^{n/2} / Gamma(n/2)."""
    if n < 1:
        raise ValueError("omega(n) needs n >= 1")
    return 2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0)


@dataclass
class QuadratureConfig:
    """Tolerance knobs; arcs and points are exact and have none."""

    tol_2d: float = 1e-10
    tol_3d: float = 1e-7
    max_depth: int = 26
    cache_size: int = 100_000


DEFAULT_CONFIG = QuadratureConfig()


# -- weights ----------------------------------------------------------------


@dataclass(frozen=True)
class CrossWith:
    """Weight u -> v x u for a 2-dim carrier in R^3 with v orthogonal to it."""

    v: tuple

    def __init__(self, v):
        object.__setattr__(self, "v", tuple(float(x) for x in v))


@dataclass(frozen=True)
class PerpComplement:
    """Weight u -> rot90(u) for the full circle in R^2 (positive orientation)."""


# -- spherical regions -------------------------------------------------------


class SphericalRegion:
    """S_V intersected with the polyhedral cone {z in V : G z >= 0}.

    Constraints are stored in carrier coordinates, unit-normalized and
    deduplicated; the row order is canonical so equal regions hash equally.
    """

    __slots__ = ("carrier", "constraints", "_key")

    def __init__(self, carrier: Subspace, constraints=None, ambient_constraints=None):
        self.carrier = carrier
        m = carrier.dim
        rows = []
        if constraints is not None and m > 0:
            arr = np.asarray(constraints, dtype=float)
            if arr.size:
                for g in arr.reshape(-1, m):
                    rows.append(g)
        if ambient_constraints is not None and m > 0:
            for g in ambient_constraints:
                rows.append(carrier.coords(g))
        clean = []
        for g in rows:
            ng = np.linalg.norm(g)
            if ng > 1e-10:
                clean.append(g / ng)
        # canonical order + dedup on a rounded key
        seen = {}
        for g in clean:
            seen[tuple(np.round(g, 12))] = g
        ordered = sorted(seen.items())
        self.constraints = (
            np.array([g for _, g in ordered]) if ordered else np.zeros((0, m))
        )
        self._key = None

    @property
    def dim(self):
        """Declared region dimension (the Hausdorff dimension integrated at)."""
        return self.carrier.dim - 1

    def cache_key(self):
        if self._key is None:
            payload = (
                np.round(self.carrier.basis, 12).tobytes(),
                np.round(self.constraints, 12).tobytes(),
            )
            self._key = payload
        return self._key

    def with_extra_constraints(self, ambient_normals):
        keep = [g for g in np.atleast_2d(np.asarray(ambient_normals, dtype=float))]
        return SphericalRegion(
            self.carrier,
            constraints=self.constraints,
            ambient_constraints=keep,
        )

    @staticmethod
    def full_sphere(n):
        return SphericalRegion(Subspace.full(n))

    def __repr__(self):
        return (
            f"SphericalRegion(carrier dim {self.carrier.dim} in R^{self.carrier.ambient_dim}, "
            f"{len(self.constraints)} constraints)"
        )


_intersect_cache: dict = {}


def intersect_with_cone(region: SphericalRegion, cone_normals) -> SphericalRegion:
    """Intersect with {u : <g, u> >= 0 for each g}; redundant rows are pruned
    when the result is pointed and full-dimensional."""
    normals = np.atleast_2d(np.asarray(cone_normals, dtype=float))
    key = (region.cache_key(), np.round(normals, 12).tobytes())
    hit = _intersect_cache.get(key)
    if hit is not None:
        return hit
    out = region.with_extra_constraints(normals)
    pruned = _prune(out)
    result = pruned if pruned is not None else out
    if len(_intersect_cache) > 50000:
        _intersect_cache.clear()
    _intersect_cache[key] = result
    return result


def _prune(region):
    """Rebuild a minimal H-representation from the extreme rays (canonical)."""
    m = region.carrier.dim
    if m < 2 or len(region.constraints) == 0:
        return None
    lin = _lineality(region.constraints, m)
    if lin.shape[0] > 0:
        return None
    rays = _extreme_rays(region.constraints, np.eye(m)[:0], m)
    if len(rays) < m or np.linalg.matrix_rank(np.array(rays), tol=1e-9) < m:
        return None
    halves = _facets_from_rays(np.array(rays), m)
    if halves is None:
        return None
    return SphericalRegion(region.carrier, constraints=halves)


# -- cone analysis ------------------------------------------------------------


def _lineality(constraints, m):
    """Orthonormal basis (rows) of {z : G z = 0} meet the carrier coords."""
    if len(constraints) == 0:
        return np.eye(m)
    _, sv, vt = np.linalg.svd(constraints)
    rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if len(sv) else 1.0)))
    return vt[rank:]

def _extreme_rays(constraints, lineality_rows, m):
    """Extreme rays of the pointed part of {Gz >= 0}, in the subspace
    orthogonal to the lineality space.  Deterministic order."""
    g = constraints
    nc = len(g)
    rays = {}
    if nc == 0:
        return []
    if m == 1:
        for z in (np.array([1.0]), np.array([-1.0])):
            if np.all(g @ z >= -1e-10):
                rays[tuple(np.round(z, 10))] = z
        return [rays[k] for k in sorted(rays)]
    # candidate rays: null directions of (m-1)-subsets of active constraints,
    # restricted to the orthogonal complement of the lineality space
    proj_rows = [g]
    if lineality_rows.shape[0] > 0:
        proj_rows.append(lineality_rows)
        proj_rows.append(-lineality_rows)
    gg = np.vstack(proj_rows)
    for combo in itertools.combinations(range(len(gg)), m - 1):
        sub = gg[list(combo)]
        if np.linalg.matrix_rank(sub, tol=1e-9) != m - 1:
            continue
        _, _, vt = np.linalg.svd(sub)
        d = vt[-1]
        for z in (d, -d):
            if np.all(g @ z >= -1e-9) and (
                lineality_rows.shape[0] == 0
                or np.all(np.abs(lineality_rows @ z) <= 1e-9)
            ):
                z = z / np.linalg.norm(z)
                rays[tuple(np.round(z, 10))] = z
    return [rays[k] for k in sorted(rays)]


def _facets_from_rays(rays, m):
    """Minimal halfspace rows of cone(rays), assuming pointed & full-dim."""
    halves = {}
    for combo in itertools.combinations(range(len(rays)), m - 1):
        sub = rays[list(combo)]
        if np.linalg.matrix_rank(sub, tol=1e-9) != m - 1:
            continue
        _, _, vt = np.linalg.svd(sub)
        h = vt[-1]
        dots = rays @ h
        if np.all(dots >= -1e-9):
            pass
        elif np.all(dots <= 1e-9):
            h = -h
        else:
            continue
        halves[tuple(np.round(h, 10))] = h
    if not halves:
        return None
    return np.array([halves[k] for k in sorted(halves)])


# -- region decomposition ------------------------------------------------------


def _point_set(region):
    """Points of a 0-dimensional region, in carrier coordinates."""
    g = region.constraints
    pts = []
    for z in (np.array([1.0]), np.array([-1.0])):
        if len(g) == 0 or np.all(g @ z >= -1e-10):
            pts.append(z)
    return pts


def _arc_intervals(region):
    """The (single, convex) angular interval of a 1-dim region, or None if
    the region has measure zero.  Full circle is (0, 2*pi)."""
    g = region.constraints
    if len(g) == 0:
        return (0.0, 2.0 * math.pi)
    lo, hi = None, None
    for row in g:
        a = math.atan2(row[1], row[0])
        jlo, jhi = a - math.pi / 2.0, a + math.pi / 2.0
        if lo is None:
            lo, hi = jlo, jhi
            continue
        # shift J by multiples of 2 pi to best overlap [lo, hi]
        best = None
        for shift in (-2.0 * math.pi, 0.0, 2.0 * math.pi):
            l2, h2 = max(lo, jlo + shift), min(hi, jhi + shift)
            if best is None or (h2 - l2) > (best[1] - best[0]):
                best = (l2, h2)
        lo, hi = best
        if hi - lo <= 1e-12:
            return None
    return (lo, hi)


def _spherical_simplices(region):
    """Decompose a region of carrier dim >= 3 into spherical simplices.

    Returns an array (B, m, m) of unit vertices in carrier coordinates, or an
    empty array when the region has measure zero.
    """
    m = region.carrier.dim
    g = region.constraints
    lin = _lineality(g, m)
    rays = _extreme_rays(g, lin, m) if len(g) else []
    gens = list(rays)
    for w in lin:
        gens.append(w)
        gens.append(-w)
    if len(gens) == 0:
        return np.zeros((0, m, m))
    gmat = np.array(gens)
    if np.linalg.matrix_rank(gmat, tol=1e-9) < m:
        return np.zeros((0, m, m))  # lower-dimensional: measure zero
    chat = gmat.sum(axis=0)
    nc = np.linalg.norm(chat)
    if nc > 1e-9:
        chat = chat / nc
        if np.min(gmat @ chat) > 0.05:
            return _fan(gmat, chat, m)
    # wide or non-pointed: split by the coordinate orthants of the carrier
    pieces = []
    for signs in itertools.product((1.0, -1.0), repeat=m):
        cons = np.vstack([g, np.diag(signs)]) if len(g) else np.diag(signs)
        prays = _extreme_rays(cons, np.eye(m)[:0], m)
        if len(prays) < m:
            continue
        pmat = np.array(prays)
        if np.linalg.matrix_rank(pmat, tol=1e-9) < m:
            continue
        c2 = pmat.sum(axis=0)
        c2 = c2 / np.linalg.norm(c2)
        pieces.append(_fan(pmat, c2, m))
    if not pieces:
        return np.zeros((0, m, m))
    return np.concatenate(pieces, axis=0)


def _fan(rays, chat, m):
    """Fan a pointed hemisphere-contained cone into spherical simplices.

    Rays are cut by the plane <chat, x> = 1 and the cross-section polytope is
    fanned from its lexicographically smallest vertex.
    """
    if m == 3:
        # order rays around chat, starting the fan at the lex-smallest ray
        frame = _plane_frame(chat)
        ang = np.arctan2(rays @ frame[1], rays @ frame[0])
        order = np.argsort(ang, kind="stable")
        cyc = [rays[i] for i in order]
        start = min(range(len(cyc)), key=lambda i: tuple(np.round(cyc[i], 10)))
        cyc = cyc[start:] + cyc[:start]
        tris = []
        for i in range(1, len(cyc) - 1):
            tris.append([cyc[0], cyc[i], cyc[i + 1]])
        return np.array(tris) if tris else np.zeros((0, 3, 3))
    if m == 4:
        from scipy.spatial import Delaunay

        cut = rays / (rays @ chat)[:, None]
        frame = _hyperplane_frame(chat)
        local = (cut - chat) @ frame.T
        if len(local) == 4:
            simplices = np.array([[0, 1, 2, 3]])
        else:
            simplices = Delaunay(local).simplices
            simplices = np.array(sorted(tuple(sorted(s)) for s in simplices))
        tets = rays[simplices]
        return tets
    raise ValueError(f"no simplex decomposition for carrier dim {m}")


def _plane_frame(chat):
    """Deterministic orthonormal frame of the plane orthogonal to chat (R^3)."""
    pick = int(np.argmin(np.abs(chat)))
    e = np.zeros(3)
    e[pick] = 1.0
    f0 = np.cross(chat, e)
    f0 = f0 / np.linalg.norm(f0)
    f1 = np.cross(chat, f0)
    return np.array([f0, f1])


def _hyperplane_frame(chat):
    """Orthonormal basis (rows) of the hyperplane orthogonal to chat (R^4)."""
    mat = np.vstack([chat])
    _, _, vt = np.linalg.svd(mat)
    return vt[1:]


# -- closed-form circle integrals ---------------------------------------------


def _trig_integral(a, b, lo, hi):
    """Integral of cos^a(t) sin^b(t) over [lo, hi], by reduction formulas."""
    if a >= 2:
        boundary = (
            math.cos(hi) ** (a - 1) * math.sin(hi) ** (b + 1)
            - math.cos(lo) ** (a - 1) * math.sin(lo) ** (b + 1)
        ) / (a + b)
        return boundary + (a - 1) / (a + b) * _trig_integral(a - 2, b, lo, hi)
    if b >= 2:
        boundary = -(
            math.cos(hi) ** (a + 1) * math.sin(hi) ** (b - 1)
            - math.cos(lo) ** (a + 1) * math.sin(lo) ** (b - 1)
        ) / (a + b)
        return boundary + (b - 1) / (a + b) * _trig_integral(a, b - 2, lo, hi)
    if (a, b) == (0, 0):
        return hi - lo
    if (a, b) == (1, 0):
        return math.sin(hi) - math.sin(lo)
    if (a, b) == (0, 1):
        return math.cos(lo) - math.cos(hi)
    return (math.sin(hi) ** 2 - math.sin(lo) ** 2) / 2.0


def _arc_mixed_moments(interval, upow, wpow, sigma):
    """Carrier-coordinate tensor of integral(w^wpow (.) u^upow) over an arc.

    u(t) = (cos t, sin t); w(t) = sigma * (-sin t, cos t).  Returns a rank
    (upow + wpow) SymTensor on R^2 in carrier coordinates.
    """
    lo, hi = interval
    # polynomial in z with trig-polynomial coefficients, built factor by factor
    acc = {(): {(0, 0): 1.0}}
    forms = ["u"] * upow + ["w"] * wpow
    for kind in forms:
        nxt = {}
        if kind == "u":
            parts = [((1,), (1, 0), 1.0), ((2,), (0, 1), 1.0)]
        else:
            parts = [((1,), (0, 1), -sigma), ((2,), (1, 0), sigma)]
        for zidx, trig in acc.items():
            for zi, dtrig, scale in parts:
                key = tuple(sorted(zidx + zi))
                slot = nxt.setdefault(key, {})
                for (ca, sb), coef in trig.items():
                    tkey = (ca + dtrig[0], sb + dtrig[1])
                    slot[tkey] = slot.get(tkey, 0.0) + coef * scale
        acc = nxt
    coeffs = {}
    for zidx, trig in acc.items():
        val = sum(coef * _trig_integral(ca, sb, lo, hi) for (ca, sb), coef in trig.items())
        if val != 0.0:
            coeffs[zidx] = val
    return SymTensor(2, upow + wpow, coeffs, validate=False)


# -- moment cache ---------------------------------------------------------------


_cache: dict = {}


def clear_cache():
    _cache.clear()


def _cached_carrier_moments(region, degree, config):
    """Vector of monomial integrals over the region, in carrier coordinates.

    Only used for carrier dim >= 3 (the adaptive engines); keyed on the
    canonical region representation and the degree.
    """
    m = region.carrier.dim
    key = (region.cache_key(), degree, m)
    hit = _cache.get(key)
    if hit is not None:
        return hit
    exps = np.array(
        [list(alpha) for alpha in _exponents(degree, m)], dtype=np.int64
    ).reshape(-1, m)
    simplices = _spherical_simplices(region)
    if simplices.shape[0] == 0:
        vals = np.zeros(exps.shape[0])
    else:
        tol = config.tol_2d if m == 3 else config.tol_3d
        vals = _quad.integrate_spherical_simplices(
            simplices, exps, tol, max_depth=config.max_depth
        )
    if len(_cache) >= config.cache_size:
        _cache.clear()
    _cache[key] = vals
    return vals


def _exponents(degree, m):
    """All exponent tuples of total degree `degree` over m coordinates."""
    if m == 1:
        yield (degree,)
        return
    for head in range(degree, -1, -1):
        for rest in _exponents(degree - head, m - 1):
            yield (head,) + rest


# -- the public moment operations -----------------------------------------------


def spherical_moment(
    region: SphericalRegion,
    s: int,
    weight=None,
    config: Optional[QuadratureConfig] = None,
) -> SymTensor:
    """integral over the region of w(u) (.) u^s dH^{region.dim}(u).

    weight is None, CrossWith(v) (carrier must be a 2-dim subspace of R^3
    with v orthogonal to it) or PerpComplement() (full circle in R^2).
    """
    config = config or DEFAULT_CONFIG
    n = region.carrier.ambient_dim
    m = region.carrier.dim
    wpow = 0
    sigma = 1.0
    cross_v = None
    if isinstance(weight, CrossWith):
        if n != 3 or m > 2:
            raise ValueError("CrossWith needs a carrier of dim <= 2 inside R^3")
        cross_v = np.asarray(weight.v, dtype=float)
        if m and np.linalg.norm(region.carrier.basis @ cross_v) > 1e-10:
            raise ValueError("CrossWith vector must be orthogonal to the carrier")
        if m == 2:
            b1, b2 = region.carrier.basis
            sigma = float(np.sign(np.linalg.det(np.array([cross_v, b1, b2]))))
        wpow = 1
    elif isinstance(weight, PerpComplement):
        if n != 2:
            raise ValueError("PerpComplement needs ambient dimension 2")
        if m == 2:
            sigma = float(np.sign(np.linalg.det(region.carrier.basis)))
        wpow = 1
    elif weight is not None:
        raise ValueError(f"unknown weight {weight!r}")
    rank = s + wpow
    if m == 0:
        return SymTensor.zero(n, rank)
    if m == 1:
        # weighted point sums (the two-normal case of one-dimensional bodies)
        total = SymTensor.zero(n, rank)
        b = region.carrier.basis[0]
        for z in _point_set(region):
            u = z[0] * b
            term = vector_power(u, s)
            if wpow:
                w = _oriented_complement_vector(u, cross_v)
                term = sym_product(term, SymTensor.from_vector(w))
            total = total + term
        return total
    if m == 2:
        interval = _arc_intervals(region)
        if interval is None:
            return SymTensor.zero(n, rank)
        carrier_tensor = _arc_mixed_moments(interval, s, wpow, sigma)
        return pullback(carrier_tensor, region.carrier)
    # adaptive engines (carrier dim 3 or 4)
    vals = _cached_carrier_moments(region, s, config)
    coeffs = {}
    for alpha, val in zip(_exponents(s, m), vals):
        if val == 0.0:
            continue
        mult = math.factorial(s)
        for a in alpha:
            mult //= math.factorial(a)
        idx = tuple(
            sorted(itertools.chain.from_iterable([i + 1] * a for i, a in enumerate(alpha)))
        )
        coeffs[idx] = mult * val
    carrier_tensor = SymTensor(m, s, coeffs, validate=False)
    return pullback(carrier_tensor, region.carrier)


def arc_mixed_spherical_moment(
    region: SphericalRegion, upow: int, wpow: int, orient_vector=None
) -> SymTensor:
    """integral of w^wpow (.) u^upow over an arc region (helper for the
    representation-fitting families; w = oriented complement of u).

    For a carrier inside R^3, orient_vector fixes the orientation (w = v x u);
    for R^2 the global orientation is used.
    """
    n = region.carrier.ambient_dim
    if region.carrier.dim != 2:
        raise ValueError("mixed arc moments need a 2-dim carrier")
    if orient_vector is not None:
        v = np.asarray(orient_vector, dtype=float)
        b1, b2 = region.carrier.basis
        sigma = float(np.sign(np.linalg.det(np.array([v, b1, b2]))))
    else:
        sigma = float(np.sign(np.linalg.det(region.carrier.basis)))
    interval = _arc_intervals(region)
    if interval is None:
        return SymTensor.zero(n, upow + wpow)
    return pullback(_arc_mixed_moments(interval, upow, wpow, sigma), region.carrier)


def _oriented_complement_vector(u, cross_v=None):
    """rot90(u) in R^2, or cross_v x u in R^3."""
    u = np.asarray(u, dtype=float)
    if cross_v is not None:
        return np.cross(cross_v, u)
    return np.array([-u[1], u[0]])


def spherical_measure(region: SphericalRegion, config=None) -> float:
    """H^{dim}(region); counting measure for point regions."""
    t = spherical_moment(region, 0, config=config)
    return t.coeffs.get((), 0.0)


# -- polytope moments ------------------------------------------------------------


def simplex_moment(vertices, r: int) -> SymTensor:
    """Exact integral of x^r over the simplex conv(vertices) w.r.t. H^k.

    Closed form: k! Vol * r!/(r+k)! * sum over all monomials of degree r in
    the vertices (complete homogeneous symmetric polynomial in the symmetric
    tensor algebra).
    """
    verts = np.asarray(vertices, dtype=float)
    k = verts.shape[0] - 1
    n = verts.shape[1]
    if k == 0:
        return vector_power(verts[0], r)
    edges = verts[1:] - verts[:1]
    gram = edges @ edges.T
    vol2 = float(np.linalg.det(gram))
    if vol2 <= 0.0:
        return SymTensor.zero(n, r)
    vol = math.sqrt(vol2) / math.factorial(k)
    scale = math.factorial(k) * vol * math.factorial(r) / math.factorial(r + k)
    total = SymTensor.zero(n, r)
    for alpha in _exponents(r, k + 1):
        term = SymTensor.scalar(n, 1.0)
        for vi, a in enumerate(alpha):
            if a:
                term = sym_product(term, vector_power(verts[vi], a))
        total = total + term
    return scale * total


def polytope_moment(polytope, r: int) -> SymTensor:
    """integral of x^r over a polytope region of dimension k, exactly.

    `polytope` must provide ambient_dim, and triangulate() yielding simplex
    vertex arrays.
    """
    total = SymTensor.zero(polytope.ambient_dim, r)
    for simplex in polytope.triangulate():
        total = total + simplex_moment(simplex, r)
    return total
