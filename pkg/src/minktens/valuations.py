"""Local tensor valuations on polytopes.

The computed family:

  phi(P, eta, k, r, s, j)      face-wise Q_{L(F)}^j-weighted local tensors,
                               normalized by 1/(r! s! omega_{n-k+s}),
  phi_tilde_3d(P, eta, r,s,j)  the extra rotation-covariant valuations on
                               edges of 3-polytopes (vector-product weight),
  phi_tilde_2d(P, eta, k,r,s)  their planar siblings (rot90 weight),

plus global Minkowski tensors, Q-power multiplication, and the basis
enumeration used by the classification layer.

Patches are finite unions of product sets, so every term factorizes into a
position moment times a spherical moment.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrate import (
    CrossWith,
    PerpComplement,
    QuadratureConfig,
    intersect_with_cone,
    omega,
    polytope_moment,
    spherical_moment,
)
from .polytopes import (
    GeometryError,
    NormalAll,
    NormalCone,
    Polytope,
    PositionAll,
    SupportPatch,
    clip_by_halfspaces,
    edge_unit_vector,
    normal_cone,
)
from .symtensor import SymTensor, metric_on_subspace, metric_tensor, sym_power, sym_product, vector_power

__all__ = [
    "normalizing_constant",
    "phi",
    "phi_tilde_3d",
    "phi_tilde_2d",
    "minkowski_tensor",
    "q_power_multiply",
    "BasisDescriptor",
    "enumerate_basis",
    "evaluate_basis_element",
    "translation_family",
]


def normalizing_constant(n, k, r, s):
    """C_{n,k}^{r,s} = (r! s! omega_{n-k+s})^{-1}."""
    if not 0 <= k <= n - 1:
        raise ValueError(f"k={k} out of range for n={n}")
    return 1.0 / (math.factorial(r) * math.factorial(s) * omega(n - k + s))


def _cached_normal_cone(polytope, face):
    key = ("nucone", face.vertex_indices, face.dim)
    if key not in polytope._cache:
        polytope._cache[key] = normal_cone(polytope, face)
    return polytope._cache[key]


def _position_piece(polytope, face, position):
    """F intersected with the position region, as a polytope or None.

    Pieces that drop below dim F carry no H^{dim F} measure and are dropped.
    """
    fpoly = polytope.face_polytope(face)
    if isinstance(position, PositionAll):
        return fpoly
    key = ("clip", face.vertex_indices, position)
    if key in polytope._cache:
        return polytope._cache[key]
    piece = clip_by_halfspaces(fpoly, position.halfspaces())
    if piece is not None and piece.intrinsic_dim < face.dim:
        piece = None
    polytope._cache[key] = piece
    return piece


def _normal_piece(polytope, face, normal):
    region = _cached_normal_cone(polytope, face)
    if isinstance(normal, NormalAll):
        return region
    return intersect_with_cone(region, np.array(normal.normals))


def _face_terms(polytope, patch, face, r, s, weight, config):
    """Sum over patch pairs of x-moment (.) u-moment for one face."""
    total = None
    for pair in patch.pairs:
        piece = _position_piece(polytope, face, pair.position)
        if piece is None:
            continue
        region = _normal_piece(polytope, face, pair.normal)
        umom = spherical_moment(region, s, weight=weight, config=config)
        if umom.is_zero():
            continue
        xmom = polytope_moment(piece, r)
        term = sym_product(xmom, umom)
        total = term if total is None else total + term
    return total


def phi(
    polytope: Polytope,
    patch: SupportPatch,
    k: int,
    r: int,
    s: int,
    j: int = 0,
    config: Optional[QuadratureConfig] = None,
) -> SymTensor:
    """Generalized local tensor of face dimension k; rank 2j + r + s."""
    n = polytope.ambient_dim
    if not 0 <= k <= n - 1:
        raise ValueError(f"k={k} out of range for n={n}")
    if k == 0 and j != 0:
        raise ValueError("j must be 0 when k = 0")
    rank = 2 * j + r + s
    total = SymTensor.zero(n, rank)
    for face in polytope.faces(k):
        terms = _face_terms(polytope, patch, face, r, s, None, config)
        if terms is None:
            continue
        if j:
            ql = metric_on_subspace(face.direction_space)
            terms = sym_product(sym_power(ql, j), terms)
        total = total + terms
    return normalizing_constant(n, k, r, s) * total


def phi_tilde_3d(
    polytope: Polytope,
    patch: SupportPatch,
    r: int,
    s: int,
    j: int = 0,
    config: Optional[QuadratureConfig] = None,
) -> SymTensor:
    """Edge valuation with vector-product weight; rank 2j + r + s + 2.

    The per-edge unit vector enters with an odd power and once through the
    vector product, so the value is independent of its sign.
    """
    n = polytope.ambient_dim
    if n != 3:
        raise ValueError("this valuation lives on polytopes in R^3")
    rank = 2 * j + r + s + 2
    total = SymTensor.zero(n, rank)
    for face in polytope.faces(1):
        v = edge_unit_vector(polytope, face)
        terms = _face_terms(polytope, patch, face, r, s, CrossWith(v), config)
        if terms is None:
            continue
        total = total + sym_product(vector_power(v, 2 * j + 1), terms)
    return total


def phi_tilde_2d(
    polytope: Polytope,
    patch: SupportPatch,
    k: int,
    r: int,
    s: int,
    config: Optional[QuadratureConfig] = None,
) -> SymTensor:
    """Planar valuation with rot90 weight; rank r + s + 1.

    For one-dimensional bodies both unit normals of the segment contribute,
    with the orientation factor flipping sign between them.
    """
    n = polytope.ambient_dim
    if n != 2:
        raise ValueError("this valuation lives on polytopes in R^2")
    if k not in (0, 1):
        raise ValueError("k must be 0 or 1")
    rank = r + s + 1
    total = SymTensor.zero(n, rank)
    for face in polytope.faces(k):
        terms = _face_terms(polytope, patch, face, r, s, PerpComplement(), config)
        if terms is None:
            continue
        total = total + terms
    return total


def minkowski_tensor(
    polytope: Polytope, k: int, r: int, s: int, config: Optional[QuadratureConfig] = None
) -> SymTensor:
    """Global tensor: omega_{n-k} C_{n,k}^{r,s} integral of x^r u^s over the
    whole normal bundle at face dimension k."""
    n = polytope.ambient_dim
    return omega(n - k) * phi(polytope, SupportPatch.everything(), k, r, s, 0, config)


def q_power_multiply(m: int, t: SymTensor) -> SymTensor:
    """Q^m (.) t; commutes with every orthogonal map."""
    if m == 0:
        return t
    return sym_product(sym_power(metric_tensor(t.n), m), t)


# -- basis enumeration ------------------------------------------------------------


@dataclass(frozen=True)
class BasisDescriptor:
    """Names one basis valuation Q^m phi_k^{r,s,j}, Q^m tilde3^{r,s,j} or
    Q^m tilde2_k^{r,s}."""

    kind: str
    n: int
    m: int
    r: int
    s: int
    k: Optional[int] = None
    j: Optional[int] = None

    @property
    def rank(self):
        if self.kind == "phi":
            return 2 * self.m + 2 * self.j + self.r + self.s
        if self.kind == "tilde3":
            return 2 * self.m + 2 * self.j + self.r + self.s + 2
        return 2 * self.m + self.r + self.s + 1

    @property
    def translation_degree(self):
        return self.r

    def validate(self):
        if min(self.m, self.r, self.s) < 0:
            raise ValueError("indices must be nonnegative")
        if self.kind == "phi":
            if self.k is None or self.j is None:
                raise ValueError("phi descriptors need k and j")
            if not 0 <= self.k <= self.n - 1:
                raise ValueError("k out of range")
            if self.j != 0 and self.k in (0, self.n - 1):
                raise ValueError("j must vanish for k in {0, n-1}")
        elif self.kind == "tilde3":
            if self.n != 3:
                raise ValueError("tilde3 descriptors need n = 3")
            if self.j is None or self.k is not None:
                raise ValueError("tilde3 descriptors carry j but no k")
        elif self.kind == "tilde2":
            if self.n != 2:
                raise ValueError("tilde2 descriptors need n = 2")
            if self.k not in (0, 1) or self.j is not None:
                raise ValueError("tilde2 descriptors carry k in {0,1} but no j")
        else:
            raise ValueError(f"unknown kind {self.kind!r}")
        return self

    def label(self):
        if self.kind == "phi":
            return f"Q^{self.m} phi_{self.k}^({self.r},{self.s},{self.j})"
        if self.kind == "tilde3":
            return f"Q^{self.m} tilde^({self.r},{self.s},{self.j})"
        return f"Q^{self.m} tilde_{self.k}^({self.r},{self.s})"

    def to_dict(self):
        out = {"kind": self.kind, "m": self.m, "r": self.r, "s": self.s}
        if self.k is not None:
            out["k"] = self.k
        if self.j is not None:
            out["j"] = self.j
        return out

    @staticmethod
    def from_dict(rec, n):
        return BasisDescriptor(
            kind=rec["kind"],
            n=n,
            m=int(rec.get("m", 0)),
            r=int(rec.get("r", 0)),
            s=int(rec.get("s", 0)),
            k=rec.get("k"),
            j=rec.get("j"),
        ).validate()


def enumerate_basis(n: int, p: int) -> list:
    """All basis descriptors of rank p on R^n, deterministically ordered.

    phi descriptors satisfy 2m + 2j + r + s = p with j = 0 for k in {0, n-1};
    the extra families exist only for n = 3 (2m + 2j + r + s + 2 = p) and
    n = 2 (2m + r + s + 1 = p, k in {0, 1}).
    """
    if n < 2 or p < 0:
        raise ValueError("need n >= 2 and p >= 0")
    out = []
    for k in range(n):
        jmax = 0 if k in (0, n - 1) else p // 2
        for j in range(jmax + 1):
            for m in range((p - 2 * j) // 2 + 1):
                rs = p - 2 * m - 2 * j
                if rs < 0:
                    continue
                for r in range(rs + 1):
                    out.append(
                        BasisDescriptor("phi", n, m, r, rs - r, k=k, j=j).validate()
                    )
    out.sort(key=lambda d: (d.k, d.m, d.j, d.r, d.s))
    if n == 3:
        extra = []
        for j in range((p - 2) // 2 + 1 if p >= 2 else 0):
            for m in range((p - 2 - 2 * j) // 2 + 1):
                rs = p - 2 - 2 * m - 2 * j
                if rs < 0:
                    continue
                for r in range(rs + 1):
                    extra.append(
                        BasisDescriptor("tilde3", n, m, r, rs - r, j=j).validate()
                    )
        extra.sort(key=lambda d: (d.m, d.j, d.r, d.s))
        out.extend(extra)
    if n == 2:
        extra = []
        for k in (0, 1):
            for m in range((p - 1) // 2 + 1 if p >= 1 else 0):
                rs = p - 1 - 2 * m
                if rs < 0:
                    continue
                for r in range(rs + 1):
                    extra.append(
                        BasisDescriptor("tilde2", n, m, r, rs - r, k=k).validate()
                    )
        extra.sort(key=lambda d: (d.k, d.m, d.r, d.s))
        out.extend(extra)
    return out


def evaluate_basis_element(
    descriptor: BasisDescriptor,
    polytope: Polytope,
    patch: SupportPatch,
    config: Optional[QuadratureConfig] = None,
) -> SymTensor:
    """Dispatch a descriptor to its valuation and multiply by Q^m."""
    d = descriptor.validate()
    if polytope.ambient_dim != d.n:
        raise ValueError("polytope dimension does not match the descriptor")
    if d.kind == "phi":
        core = phi(polytope, patch, d.k, d.r, d.s, d.j, config)
    elif d.kind == "tilde3":
        core = phi_tilde_3d(polytope, patch, d.r, d.s, d.j, config)
    else:
        core = phi_tilde_2d(polytope, patch, d.k, d.r, d.s, config)
    return q_power_multiply(d.m, core)


def translation_family(descriptor: BasisDescriptor):
    """The exact translation law of a basis element.

    Returns [(i, lower_descriptor, coefficient)] such that

        val(P + t, eta + t) = sum_i coefficient_i * t^i (.) val_lower_i(P, eta).

    The normalized phi family transforms with 1/i!; the unnormalized tilde
    families with binom(r, i).
    """
    d = descriptor.validate()
    out = []
    for i in range(d.r + 1):
        lower = BasisDescriptor(d.kind, d.n, d.m, d.r - i, d.s, k=d.k, j=d.j)
        if d.kind == "phi":
            coef = 1.0 / math.factorial(i)
        else:
            coef = float(math.comb(d.r, i))
        out.append((i, lower, coef))
    return out
