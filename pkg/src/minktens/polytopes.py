"""Vertex-presented convex polytopes with full face lattices and normal cones.

Polytopes are built from point lists (n <= 4, desk scale) by supporting-
hyperplane enumeration with 1e-9 predicates.  Lower-dimensional polytopes
(points, segments, polygons in R^3, ...) are first class: faces of dimension
k = dim P are the polytope itself, and normal cones then contain the full
orthogonal complement of the affine hull.

Vertices are deduplicated and sorted lexicographically, so construction is
invariant under permutations of the input list.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .integrate import SphericalRegion, _extreme_rays, _facets_from_rays, _lineality
from .symtensor import Subspace

__all__ = [
    "Polytope",
    "Face",
    "build_polytope",
    "normal_cone",
    "direction_space",
    "edge_unit_vector",
    "oriented_complement",
    "normal_bundle_contains",
    "clip_by_halfspaces",
    "SupportPatch",
    "PatchPair",
    "PositionAll",
    "PositionBox",
    "PositionPolytope",
    "NormalAll",
    "NormalCone",
    "GeometryError",
]

TOL = 1e-9


class GeometryError(ValueError):
    """Degenerate or ambiguous configurations that are reported, not resolved."""


@dataclass(frozen=True)
class Face:
    """One face of a polytope: dimension, vertex indices, direction space and
    the outer normals of the facets containing it (normal-cone generators)."""

    dim: int
    vertex_indices: tuple
    direction_space: Subspace = field(repr=False)
    normal_generators: tuple = field(repr=False)


class Polytope:
    def __init__(self, ambient_dim, vertices, intrinsic_dim, base, hull_basis, faces_by_dim):
        self.ambient_dim = ambient_dim
        self.vertices = vertices
        self.intrinsic_dim = intrinsic_dim
        self.base = base
        self.hull_basis = hull_basis  # Subspace: direction space of the polytope
        self.faces_by_dim = faces_by_dim
        self._cache = {}

    def faces(self, k):
        return self.faces_by_dim.get(k, [])

    def all_faces(self):
        for k in sorted(self.faces_by_dim):
            yield from self.faces_by_dim[k]

    @property
    def top_face(self):
        return self.faces_by_dim[self.intrinsic_dim][0]

    def face_points(self, face):
        return self.vertices[list(face.vertex_indices)]

    def normal_complement(self):
        """Orthonormal rows spanning L(P)^perp."""
        return self.hull_basis_complement

    @property
    def hull_basis_complement(self):
        if "complement" not in self._cache:
            self._cache["complement"] = self.hull_basis.orthogonal_complement()
        return self._cache["complement"]

    def local_coords(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts - self.base) @ self.hull_basis.basis.T

    def translate(self, t):
        return build_polytope_cached(self.vertices + np.asarray(t, dtype=float))

    def transform(self, theta):
        mat = theta.matrix if hasattr(theta, "matrix") else np.asarray(theta, dtype=float)
        return build_polytope_cached(self.vertices @ mat.T)

    def contains(self, x, tol=TOL):
        x = np.asarray(x, dtype=float)
        off = x - self.base
        resid = off - self.hull_basis.basis.T @ (self.hull_basis.basis @ off)
        if np.linalg.norm(resid) > tol:
            return False
        y = self.hull_basis.basis @ off
        for a, b in self._local_facet_halfspaces():
            if a @ y > b + tol:
                return False
        return True

    def _local_facet_halfspaces(self):
        """(a, b) rows with a . y <= b over the local coordinates."""
        if "halfspaces" in self._cache:
            return self._cache["halfspaces"]
        out = []
        d = self.intrinsic_dim
        if d >= 1:
            for fc in self.faces(d - 1):
                g = fc.normal_generators[0]
                a = self.hull_basis.basis @ g
                pt = self.local_coords(self.vertices[fc.vertex_indices[0]])[0]
                out.append((a, float(a @ pt)))
        self._cache["halfspaces"] = out
        return out

    def triangulate(self):
        """Ambient-coordinate simplices covering the polytope (no Steiner
        points; fans start at the lexicographically smallest vertex)."""
        if "triangulation" in self._cache:
            return self._cache["triangulation"]
        d = self.intrinsic_dim
        v = self.vertices
        if d == 0:
            tris = [v[:1]]
        elif d == 1:
            tris = [v[[0, len(v) - 1]]] if len(v) > 1 else [v[:1]]
        elif d == 2:
            cyc = self._polygon_cycle(self.top_face)
            tris = [v[[cyc[0], cyc[i], cyc[i + 1]]] for i in range(1, len(cyc) - 1)]
        elif d == 3:
            tris = []
            apex = 0
            for fc in self.faces(2):
                if apex in fc.vertex_indices:
                    continue
                cyc = self._polygon_cycle(fc)
                for i in range(1, len(cyc) - 1):
                    tris.append(v[[apex, cyc[0], cyc[i], cyc[i + 1]]])
        else:
            raise GeometryError("triangulation only implemented through dimension 3")
        self._cache["triangulation"] = tris
        return tris

    def _polygon_cycle(self, face):
        """Vertex indices of a 2-face in cyclic boundary order, starting at the
        smallest index."""
        idx = list(face.vertex_indices)
        pts = self.vertices[idx]
        basis = face.direction_space.basis
        center = pts.mean(axis=0)
        loc = (pts - center) @ basis.T
        ang = np.arctan2(loc[:, 1], loc[:, 0])
        order = [idx[i] for i in np.argsort(ang, kind="stable")]
        start = order.index(min(order))
        return order[start:] + order[:start]

    def face_polytope(self, face):
        """The face as a standalone polytope (cached)."""
        key = ("facepoly", face.vertex_indices)
        if key not in self._cache:
            self._cache[key] = build_polytope(self.face_points(face))
        return self._cache[key]

    def __repr__(self):
        counts = {k: len(v) for k, v in sorted(self.faces_by_dim.items())}
        return (
            f"Polytope(n={self.ambient_dim}, dim={self.intrinsic_dim}, "
            f"{len(self.vertices)} vertices, faces {counts})"
        )


def _dedup_points(points, tol=TOL):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    order = np.lexsort(pts.T[::-1])
    pts = pts[order]
    keep = []
    for p in pts:
        if not keep or all(np.linalg.norm(p - q) > tol for q in keep):
            keep.append(p)
    return np.array(keep)


_BUILD_MEMO: dict = {}


def build_polytope_cached(points) -> "Polytope":
    """Memoized build keyed on the rounded point set.

    Instances are immutable by convention, so sharing them also shares their
    normal-cone and clipping caches across callers.
    """
    key = np.round(np.asarray(points, dtype=float), 10).tobytes()
    hit = _BUILD_MEMO.get(key)
    if hit is None:
        if len(_BUILD_MEMO) > 20000:
            _BUILD_MEMO.clear()
        hit = build_polytope(points)
        _BUILD_MEMO[key] = hit
    return hit


def build_polytope(points) -> Polytope:
    """Convex hull with full face lattice; deterministic canonical ordering.

    Raises GeometryError on empty input or ambiguous supporting-hyperplane
    classification at the 1e-9 tolerance.
    """
    pts = _dedup_points(points)
    if pts.size == 0:
        raise GeometryError("no input points")
    n = pts.shape[1]
    if n > 4:
        raise GeometryError("ambient dimension beyond 4 is out of scope")
    base = pts[0].copy()
    basis = Subspace.span(pts[1:] - base, ambient_dim=n) if len(pts) > 1 else Subspace.zero(n)
    d = basis.dim
    local = (pts - base) @ basis.basis.T

    if d == 0:
        face = Face(0, (0,), Subspace.zero(n), ())
        return Polytope(n, pts[:1], 0, base, basis, {0: [face]})

    if d == 1:
        t = local[:, 0]
        lo, hi = int(np.argmin(t)), int(np.argmax(t))
        verts = _dedup_points(pts[[lo, hi]])
        basis = Subspace.span(verts[1:] - verts[0], ambient_dim=n)
        edir = basis.basis[0]
        loc1 = (verts - verts[0]) @ basis.basis.T
        f0 = Face(0, (0,), Subspace.zero(n), (-edir if loc1[0, 0] < loc1[1, 0] else edir,))
        f1 = Face(0, (1,), Subspace.zero(n), (edir if loc1[0, 0] < loc1[1, 0] else -edir,))
        top = Face(1, (0, 1), basis, ())
        return Polytope(n, verts, 1, verts[0], basis, {0: [f0, f1], 1: [top]})

    try:
        hull = ConvexHull(local)
    except QhullError as exc:
        raise GeometryError(f"hull construction failed: {exc}") from exc

    # merge simplicial facets into supporting-hyperplane facets over all points
    raw_facets = {}
    for eq in hull.equations:
        a, b = eq[:-1], -eq[-1]  # qhull: a.y + offset <= 0 -> a.y <= b
        on = np.abs(local @ a - b) <= TOL
        key = frozenset(np.nonzero(on)[0].tolist())
        if key not in raw_facets:
            raw_facets[key] = a
    # a true vertex lies in at least d facets; points merely on the boundary
    # (mid-edge or mid-facet artifacts of clipping) lie in fewer and are shed
    counts = {}
    for fs in raw_facets:
        for i in fs:
            counts[i] = counts.get(i, 0) + 1
    vert_ids = sorted(i for i, c in counts.items() if c >= d)
    if not vert_ids:
        raise GeometryError("vertex identification failed")
    reindex = {old: new for new, old in enumerate(vert_ids)}
    verts = pts[vert_ids]
    local_v = local[vert_ids]
    facet_map = {}
    for fs, a in raw_facets.items():
        key = frozenset(reindex[i] for i in fs if i in reindex)
        span = (
            np.linalg.matrix_rank(local_v[sorted(key)][1:] - local_v[sorted(key)[0]], tol=TOL)
            if len(key) > 1
            else 0
        )
        if span != d - 1:
            continue  # merged sliver without a true supporting facet
        if key not in facet_map:
            facet_map[key] = a
    for fs, a in facet_map.items():
        dist = np.abs(local_v @ a - facet_map[fs] @ local_v[sorted(fs)[0]])
        ambiguous = (dist > TOL) & (dist <= 10 * TOL)
        if ambiguous.any():
            raise GeometryError(
                "supporting-hyperplane classification is ambiguous at tol 1e-9"
            )
    # closure of facet vertex sets under intersection gives the whole lattice
    all_sets = set(facet_map)
    frontier = set(facet_map)
    while frontier:
        new = set()
        for fs in frontier:
            for gs in all_sets:
                inter = fs & gs
                if inter and inter not in all_sets and inter not in new:
                    new.add(inter)
        all_sets |= new
        frontier = new

    faces_by_dim = {}
    facet_sets = sorted(facet_map, key=lambda s: tuple(sorted(s)))
    for vs in sorted(all_sets, key=lambda s: tuple(sorted(s))):
        vidx = tuple(sorted(vs))
        fpts = verts[list(vidx)]
        fdim = Subspace.span(fpts[1:] - fpts[0], ambient_dim=n).dim if len(vidx) > 1 else 0
        gens = tuple(
            basis.basis.T @ facet_map[fs] for fs in facet_sets if vs <= fs
        )
        dspace = (
            Subspace.span(fpts[1:] - fpts[0], ambient_dim=n) if len(vidx) > 1 else Subspace.zero(n)
        )
        faces_by_dim.setdefault(fdim, []).append(Face(fdim, vidx, dspace, gens))
    top = Face(d, tuple(range(len(verts))), basis, ())
    faces_by_dim.setdefault(d, []).append(top)
    for k in faces_by_dim:
        faces_by_dim[k].sort(key=lambda f: f.vertex_indices)
    # every vertex must appear as a 0-face
    if len(faces_by_dim.get(0, [])) != len(verts):
        raise GeometryError("face lattice closure did not produce all vertices")
    return Polytope(n, verts, d, verts[0].copy(), basis, faces_by_dim)


def direction_space(face: Face) -> Subspace:
    """L(F): the translate through 0 of the affine hull of F."""
    return face.direction_space


def normal_cone(polytope: Polytope, face: Face) -> SphericalRegion:
    """nu(P, F) as a spherical region inside S_{L(F)^perp}.

    The cone is generated by the outer normals of the facets containing F
    plus (for lower-dimensional polytopes) the orthogonal complement of the
    affine hull.
    """
    if not any(f is face for f in polytope.faces(face.dim)):
        raise GeometryError("face does not belong to the polytope")
    carrier = face.direction_space.orthogonal_complement()
    m = carrier.dim
    gens = [carrier.coords(g) for g in face.normal_generators]
    comp = polytope.hull_basis_complement
    for w in comp.basis:
        gens.append(carrier.coords(w))
        gens.append(-carrier.coords(w))
    if not gens:
        return SphericalRegion(carrier)
    gmat = np.array(gens)
    span = np.linalg.matrix_rank(gmat, tol=1e-9)
    if span == m and len(face.normal_generators) == 0:
        return SphericalRegion(carrier)  # cone is the whole carrier
    if m == 1:
        g = gens[0]
        return SphericalRegion(carrier, constraints=np.array([[1.0 if g[0] > 0 else -1.0]]))
    halves = _facets_from_rays(gmat, m)
    if halves is None:
        return SphericalRegion(carrier)
    return SphericalRegion(carrier, constraints=halves)


def edge_unit_vector(polytope: Polytope, face: Face):
    """Deterministic unit vector spanning an edge: first nonzero coordinate
    positive.  Downstream valuations must not depend on the sign."""
    if face.dim != 1:
        raise GeometryError("edge_unit_vector needs a 1-dimensional face")
    pts = polytope.face_points(face)
    v = pts[-1] - pts[0]
    v = v / np.linalg.norm(v)
    for x in v:
        if abs(x) > 1e-12:
            return v if x > 0 else -v
    raise GeometryError("degenerate edge")


def oriented_complement(u, v=None, tol=1e-10):
    """n=2: the vector ubar with det[u, ubar] = +1; n=3: the vector product
    v x u, making (v, u, v x u) positively oriented."""
    u = np.asarray(u, dtype=float)
    if abs(np.linalg.norm(u) - 1.0) > tol:
        raise GeometryError("u must be a unit vector")
    if len(u) == 2:
        if v is not None:
            raise GeometryError("the planar form takes a single argument")
        return np.array([-u[1], u[0]])
    if len(u) == 3:
        if v is None:
            raise GeometryError("the spatial form needs the edge vector v")
        v = np.asarray(v, dtype=float)
        if abs(np.linalg.norm(v) - 1.0) > tol or abs(np.dot(u, v)) > tol:
            raise GeometryError("v must be a unit vector orthogonal to u")
        return np.cross(v, u)
    raise GeometryError("oriented complement exists only in dimensions 2 and 3")


def normal_bundle_contains(polytope: Polytope, x, u, tol=TOL) -> bool:
    """True iff (x, u) lies in the generalized normal bundle of P."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    if not polytope.contains(x, tol):
        return False
    d = polytope.intrinsic_dim
    n = polytope.ambient_dim
    y = polytope.local_coords(x)[0]
    active = []
    for fc in polytope.faces(d - 1) if d >= 1 else []:
        a, b = None, None
        g = fc.normal_generators[0]
        a = polytope.hull_basis.basis @ g
        pt = polytope.local_coords(polytope.vertices[fc.vertex_indices[0]])[0]
        if abs(a @ y - a @ pt) <= tol:
            active.append(fc)
    if not active:
        face = polytope.top_face
        if d == n:
            return False  # interior point of a full-dimensional polytope
    else:
        vs = set(active[0].vertex_indices)
        for fc in active[1:]:
            vs &= set(fc.vertex_indices)
        face = next(
            (
                f
                for f in polytope.all_faces()
                if set(f.vertex_indices) == vs
            ),
            None,
        )
        if face is None:
            return False
    region = normal_cone(polytope, face)
    carrier = region.carrier
    if np.linalg.norm(u - carrier.project(u)) > 10 * tol:
        return False
    c = carrier.coords(u)
    return bool(len(region.constraints) == 0 or np.all(region.constraints @ c >= -10 * tol))


# -- clipping -----------------------------------------------------------------


def clip_by_halfspaces(polytope: Polytope, halfspaces) -> Optional[Polytope]:
    """Intersection with {x : a.x <= b for each (a, b)}; None when empty.

    Crossing points are generated for every inside/outside vertex pair; the
    final hull prunes the interior ones, which keeps the step robust without
    rebuilding lattices per halfspace.
    """
    pts = [p for p in polytope.vertices]
    for a, b in halfspaces:
        a = np.asarray(a, dtype=float)
        dist = [float(a @ p - b) for p in pts]
        inside = [p for p, t in zip(pts, dist) if t <= TOL]
        outside = [(p, t) for p, t in zip(pts, dist) if t > TOL]
        if not outside:
            continue
        if not inside:
            return None
        crossings = []
        for p, tp in zip(pts, dist):
            if tp > TOL:
                continue
            for q, tq in outside:
                # a.p <= b < a.q: crossing at p + s (q - p)
                if tq - tp > 1e-15:
                    s = (0.0 - tp) / (tq - tp)
                    if 0.0 <= s <= 1.0:
                        crossings.append(p + s * (q - p))
        pts = inside + crossings
        if not pts:
            return None
    arr = _dedup_points(np.array(pts))
    if arr.size == 0:
        return None
    return build_polytope_cached(arr)


# -- support patches ------------------------------------------------------------


@dataclass(frozen=True)
class PositionAll:
    def to_dict(self):
        return {"type": "all"}


@dataclass(frozen=True)
class PositionBox:
    lo: tuple
    hi: tuple

    def __init__(self, lo, hi):
        object.__setattr__(self, "lo", tuple(float(x) for x in lo))
        object.__setattr__(self, "hi", tuple(float(x) for x in hi))

    def halfspaces(self):
        n = len(self.lo)
        out = []
        for i in range(n):
            e = np.zeros(n)
            e[i] = 1.0
            out.append((e, self.hi[i]))
            out.append((-e, -self.lo[i]))
        return out

    def to_dict(self):
        return {"type": "box", "min": list(self.lo), "max": list(self.hi)}


@dataclass(frozen=True)
class PositionPolytope:
    vertices: tuple

    def __init__(self, vertices):
        arr = np.atleast_2d(np.asarray(vertices, dtype=float))
        object.__setattr__(self, "vertices", tuple(map(tuple, arr.tolist())))

    def halfspaces(self):
        poly = build_polytope_cached(np.array(self.vertices))
        key = ("pos_halfspaces",)
        if key in poly._cache:
            return poly._cache[key]
        out = []
        basis = poly.hull_basis.basis
        for a_loc, b in poly._local_facet_halfspaces():
            a = basis.T @ a_loc
            out.append((a, b + float(a @ poly.base)))
        # affine-hull equality constraints for lower-dimensional regions
        for w in poly.hull_basis_complement.basis:
            c = float(w @ poly.base)
            out.append((w, c))
            out.append((-w, -c))
        poly._cache[key] = out
        return out

    def to_dict(self):
        return {"type": "polytope", "vertices": [list(v) for v in self.vertices]}


@dataclass(frozen=True)
class NormalAll:
    def to_dict(self):
        return {"type": "all"}


@dataclass(frozen=True)
class NormalCone:
    """Spherical cone region {u : <g, u> >= 0 for each inward normal g}."""

    normals: tuple

    def __init__(self, normals):
        arr = np.atleast_2d(np.asarray(normals, dtype=float))
        object.__setattr__(self, "normals", tuple(map(tuple, arr.tolist())))

    def to_dict(self):
        return {"type": "halfspaces", "normals": [list(g) for g in self.normals]}


@dataclass(frozen=True)
class PatchPair:
    position: object
    normal: object


def _position_from_dict(rec):
    kind = rec.get("type")
    if kind == "all":
        return PositionAll()
    if kind == "box":
        return PositionBox(rec["min"], rec["max"])
    if kind == "polytope":
        return PositionPolytope(rec["vertices"])
    raise GeometryError(f"unknown position region type {kind!r}")


def _normal_from_dict(rec):
    kind = rec.get("type")
    if kind == "all":
        return NormalAll()
    if kind == "halfspaces":
        return NormalCone(rec["normals"])
    raise GeometryError(f"unknown normal region type {kind!r}")


class SupportPatch:
    """Finite union of product sets (position region) x (normal cone region).

    Pairs must be pairwise disjoint as subsets of Sigma^n.  Construction runs
    a conservative overlap check (bounding boxes for positions, interior-
    direction feasibility for cones) unless assume_disjoint is set.
    """

    def __init__(self, pairs, assume_disjoint=False):
        self.pairs = [
            p if isinstance(p, PatchPair) else PatchPair(*p) for p in pairs
        ]
        if not assume_disjoint:
            self._check_disjoint()

    @staticmethod
    def everything():
        return SupportPatch([PatchPair(PositionAll(), NormalAll())], assume_disjoint=True)

    def _check_disjoint(self):
        for i in range(len(self.pairs)):
            for j in range(i + 1, len(self.pairs)):
                if self._pairs_overlap(self.pairs[i], self.pairs[j]):
                    raise GeometryError(
                        f"patch pairs {i} and {j} overlap; refine them or pass "
                        "assume_disjoint=True"
                    )

    @staticmethod
    def _pairs_overlap(p1, p2):
        return _positions_overlap(p1.position, p2.position) and _normals_overlap(
            p1.normal, p2.normal
        )

    def to_dict(self):
        return {
            "patches": [
                {"position": p.position.to_dict(), "normal": p.normal.to_dict()}
                for p in self.pairs
            ]
        }

    @staticmethod
    def from_dict(rec, assume_disjoint=True):
        pairs = [
            PatchPair(_position_from_dict(e["position"]), _normal_from_dict(e["normal"]))
            for e in rec["patches"]
        ]
        return SupportPatch(pairs, assume_disjoint=assume_disjoint)

    def translate(self, t):
        t = np.asarray(t, dtype=float)
        out = []
        for p in self.pairs:
            pos = p.position
            if isinstance(pos, PositionBox):
                pos = PositionBox(np.array(pos.lo) + t, np.array(pos.hi) + t)
            elif isinstance(pos, PositionPolytope):
                pos = PositionPolytope(np.array(pos.vertices) + t)
            out.append(PatchPair(pos, p.normal))
        return SupportPatch(out, assume_disjoint=True)

    def transform(self, theta):
        mat = theta.matrix if hasattr(theta, "matrix") else np.asarray(theta, dtype=float)
        out = []
        for p in self.pairs:
            pos = p.position
            if isinstance(pos, PositionBox):
                corners = _box_corners(pos.lo, pos.hi)
                pos = PositionPolytope(corners @ mat.T)
            elif isinstance(pos, PositionPolytope):
                pos = PositionPolytope(np.array(pos.vertices) @ mat.T)
            nor = p.normal
            if isinstance(nor, NormalCone):
                nor = NormalCone(np.array(nor.normals) @ mat.T)
            out.append(PatchPair(pos, nor))
        return SupportPatch(out, assume_disjoint=True)


def _box_corners(lo, hi):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = len(lo)
    corners = []
    for mask in range(1 << n):
        corners.append([hi[i] if mask >> i & 1 else lo[i] for i in range(n)])
    return np.array(corners)


def _position_bbox(pos):
    if isinstance(pos, PositionBox):
        return np.array(pos.lo), np.array(pos.hi)
    if isinstance(pos, PositionPolytope):
        arr = np.array(pos.vertices)
        return arr.min(axis=0), arr.max(axis=0)
    return None


def _positions_overlap(a, b):
    ba, bb = _position_bbox(a), _position_bbox(b)
    if ba is None or bb is None:
        return True  # at least one is "all"
    lo = np.maximum(ba[0], bb[0])
    hi = np.minimum(ba[1], bb[1])
    return bool(np.all(hi - lo > 1e-12))


def _normals_overlap(a, b):
    rows = []
    for nor in (a, b):
        if isinstance(nor, NormalCone):
            rows.extend(np.asarray(g, dtype=float) for g in nor.normals)
    if not rows:
        return True
    g = np.array(rows)
    n = g.shape[1]
    # overlap (up to measure zero) iff the combined cone is full-dimensional
    lin = _lineality(g, n)
    rays = _extreme_rays(g, lin, n)
    spanning = [r for r in rays] + [w for w in lin] + [-w for w in lin]
    if not spanning:
        return False
    return int(np.linalg.matrix_rank(np.array(spanning), tol=1e-9)) == n
