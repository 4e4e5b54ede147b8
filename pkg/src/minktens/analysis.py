"""Numerical classification machinery: axiom checking, density extraction on
flats, representation fitting, basis-span decomposition, rank certification,
and the invariant-tensor splitting used by the classification argument.

Everything is deterministic given a seed: random rotations come from seeded
Gaussian matrices orthonormalized with the determinant corrected to +1, and
tensors are flattened by evaluating them on a fixed seeded set of argument
tuples (multilinear-form semantics, not raw coefficients).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .integrate import (
    CrossWith,
    PerpComplement,
    SphericalRegion,
    arc_mixed_spherical_moment,
    spherical_moment,
)
from .polytopes import (
    NormalAll,
    NormalCone,
    PatchPair,
    Polytope,
    PositionAll,
    PositionBox,
    PositionPolytope,
    SupportPatch,
    build_polytope,
    clip_by_halfspaces,
)
from .symtensor import (
    Rotation,
    Subspace,
    SymTensor,
    evaluate,
    metric_on_subspace,
    metric_tensor,
    pullback,
    rotate,
    substitute,
    sym_power,
    sym_product,
    vector_power,
)
from .valuations import (
    BasisDescriptor,
    enumerate_basis,
    evaluate_basis_element,
    q_power_multiply,
)

__all__ = [
    "ValuationOracle",
    "AxiomReport",
    "axiom_report",
    "extract_delta",
    "fit_delta_representation",
    "DeltaFitResult",
    "decompose_on_basis",
    "DecompositionResult",
    "SampleSpec",
    "independence_rank",
    "decompose_invariant_tensor",
    "random_rotation",
    "random_polytope",
    "random_flat_samples",
    "delta_family",
    "improper_rotation_behavior",
    "group_average_fixing_complement",
    "rotation_fixing_complement",
]


# -- oracles ---------------------------------------------------------------------


@dataclass
class ValuationOracle:
    """A tensor-valued map (polytope, patch) -> SymTensor of fixed rank."""

    n: int
    p: int
    eval: Callable[[Polytope, SupportPatch], SymTensor]
    declared_degree: int = 0
    name: str = ""
    kind: Optional[str] = None  # "phi" / "tilde" for reporting, if known

    @staticmethod
    def from_descriptor(d: BasisDescriptor, config=None):
        d.validate()

        def run(P, eta):
            return evaluate_basis_element(d, P, eta, config)

        return ValuationOracle(
            n=d.n,
            p=d.rank,
            eval=run,
            declared_degree=d.translation_degree,
            name=d.label(),
            kind="phi" if d.kind == "phi" else "tilde",
        )

    @staticmethod
    def from_combo(terms, n, config=None):
        """terms: iterable of (coefficient, BasisDescriptor); all same rank."""
        terms = [(float(c), d.validate()) for c, d in terms]
        ranks = {d.rank for _, d in terms}
        if len(ranks) != 1:
            raise ValueError("combo terms must share one tensor rank")
        p = ranks.pop()

        def run(P, eta):
            total = SymTensor.zero(n, p)
            for c, d in terms:
                total = total + c * evaluate_basis_element(d, P, eta, config)
            return total

        name = " + ".join(f"{c:g}*{d.label()}" for c, d in terms)
        degree = max(d.translation_degree for _, d in terms)
        kinds = {d.kind for _, d in terms}
        return ValuationOracle(
            n=n,
            p=p,
            eval=run,
            declared_degree=degree,
            name=name,
            kind="phi" if kinds == {"phi"} else "tilde",
        )


# -- seeded randomness -------------------------------------------------------------


def random_rotation(n, rng, proper=True) -> Rotation:
    """Haar-like rotation: Gaussian matrix, QR orthonormalization, column sign
    convention, determinant corrected to +1 (or forced to -1)."""
    a = rng.normal(size=(n, n))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if proper and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    if not proper and np.linalg.det(q) > 0:
        q[:, 0] = -q[:, 0]
    return Rotation(q)


from .polytopes import build_polytope_cached as _memo_polytope  # shared instance memo


def random_polytope(n, rng, npts=None) -> Polytope:
    npts = npts or (n + 5)
    pts = rng.normal(size=(npts, n))
    return _memo_polytope(pts)


def random_box_points(n, rng, scale=1.0):
    sides = scale * rng.uniform(0.5, 1.5, size=n)
    corners = []
    for mask in range(1 << n):
        corners.append([sides[i] if mask >> i & 1 else 0.0 for i in range(n)])
    return np.array(corners)


def _random_cone_normals(n, rng, count=None):
    count = count or rng.integers(1, 3)
    g = rng.normal(size=(int(count), n))
    return g / np.linalg.norm(g, axis=1)[:, None]


def random_patch(n, rng) -> SupportPatch:
    """A single random box-times-cone product patch."""
    c = rng.uniform(-1.0, 1.0, size=n)
    w = rng.uniform(0.4, 1.6, size=n)
    pos = PositionBox(c - w, c + w)
    if rng.uniform() < 0.3:
        return SupportPatch([PatchPair(pos, NormalAll())], assume_disjoint=True)
    return SupportPatch(
        [PatchPair(pos, NormalCone(_random_cone_normals(n, rng)))], assume_disjoint=True
    )


# -- flattening ---------------------------------------------------------------------


class TensorFlattener:
    """Evaluate rank-p tensors on a fixed seeded set of argument tuples."""

    def __init__(self, n, p, count, seed=20240):
        rng = np.random.default_rng(seed + 7919 * p + 104729 * n)
        self.n, self.p = n, p
        if p == 0:
            self.tuples = [()]
        else:
            self.tuples = [tuple(rng.normal(size=n) for _ in range(p)) for _ in range(count)]

    def __call__(self, t: SymTensor):
        return np.array([evaluate(t, tup) for tup in self.tuples])

    def __len__(self):
        return len(self.tuples)


# -- axiom report ----------------------------------------------------------------------


@dataclass
class AxiomCheck:
    name: str
    passed: bool
    max_residual: float
    tolerance: float
    trials: int
    detail: str = ""

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "max_residual": float(self.max_residual),
            "tolerance": float(self.tolerance),
            "trials": int(self.trials),
            "detail": self.detail,
        }


@dataclass
class AxiomReport:
    oracle: str
    checks: list
    seed: int

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "oracle": self.oracle,
            "seed": int(self.seed),
            "passed": bool(self.passed),
            "checks": [c.to_dict() for c in self.checks],
        }


def _coeff_residual(a: SymTensor, b: SymTensor):
    keys = set(a.coeffs) | set(b.coeffs)
    if not keys:
        return 0.0
    return max(abs(a.coeffs.get(k, 0.0) - b.coeffs.get(k, 0.0)) for k in keys)


def _sample_body(n, rng):
    """Boxes, simplices and small random hulls, rotated and shifted."""
    kind = rng.integers(0, 3)
    if kind == 0:
        pts = random_box_points(n, rng)
    elif kind == 1:
        pts = np.vstack([np.zeros(n), np.diag(rng.uniform(0.6, 1.4, size=n))])
    else:
        pts = rng.normal(size=(n + 3, n))
    q = random_rotation(n, rng).matrix
    t = rng.uniform(-0.5, 0.5, size=n)
    return _memo_polytope(pts @ q.T + t)


def _check_measure_additivity(oracle, rng, trials, tol):
    worst, detail = 0.0, ""
    for i in range(trials):
        P = _sample_body(oracle.n, rng)
        base = random_patch(oracle.n, rng)
        pair = base.pairs[0]
        if rng.uniform() < 0.5:
            g = rng.normal(size=oracle.n)
            g /= np.linalg.norm(g)
            n1 = _with_extra_normal(pair, g)
            n2 = _with_extra_normal(pair, -g)
            eta1 = SupportPatch([n1], assume_disjoint=True)
            eta2 = SupportPatch([n2], assume_disjoint=True)
        else:
            lo, hi = np.array(pair.position.lo), np.array(pair.position.hi)
            axis = int(rng.integers(0, oracle.n))
            cut = float(rng.uniform(lo[axis], hi[axis]))
            h1, h2 = hi.copy(), hi.copy()
            l2 = lo.copy()
            h1[axis] = cut
            l2[axis] = cut
            eta1 = SupportPatch([PatchPair(PositionBox(lo, h1), pair.normal)], assume_disjoint=True)
            eta2 = SupportPatch([PatchPair(PositionBox(l2, hi), pair.normal)], assume_disjoint=True)
        both = SupportPatch(eta1.pairs + eta2.pairs, assume_disjoint=True)
        lhs = oracle.eval(P, eta1) + oracle.eval(P, eta2)
        rhs = oracle.eval(P, both)
        res = _coeff_residual(lhs, rhs)
        if res > worst:
            worst, detail = res, f"trial {i}"
    return AxiomCheck("measure_additivity", worst <= tol, worst, tol, trials, detail)


def _with_extra_normal(pair, g):
    if isinstance(pair.normal, NormalAll):
        return PatchPair(pair.position, NormalCone([g]))
    return PatchPair(pair.position, NormalCone(list(pair.normal.normals) + [list(g)]))


def _monomials_upto(n, q):
    out = []
    for total in range(q + 1):
        for alpha in itertools.product(range(total + 1), repeat=n):
            if sum(alpha) == total:
                out.append(alpha)
    return out


def _check_translation(oracle, rng, trials, tol):
    """Values along random translations must fill a tensor polynomial in t of
    degree <= declared_degree (the paper's polynomial translation law)."""
    n, q = oracle.n, oracle.declared_degree
    P = _sample_body(n, rng)
    eta = random_patch(n, rng)
    monos = _monomials_upto(n, q)
    need = max(2 * len(monos), len(monos) + 4)
    count = max(trials, need)
    ts = [np.zeros(n)] + [rng.uniform(-1.0, 1.0, size=n) for _ in range(count - 1)]
    flat = TensorFlattener(n, oracle.p, count=max(4, oracle.p + 2))
    rows = []
    for t in ts:
        val = oracle.eval(_memo_polytope(P.vertices + t), eta.translate(t))
        rows.append(flat(val))
    y = np.array(rows)
    a = np.array([[float(np.prod([tv ** e for tv, e in zip(t, alpha)])) for alpha in monos] for t in ts])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = np.abs(a @ coef - y).max() if y.size else 0.0
    return AxiomCheck("translation_covariance", resid <= tol, float(resid), tol, count,
                      f"degree {q}, {len(monos)} monomials")


def _check_rotation(oracle, rng, trials, tol, improper=False):
    worst, detail = 0.0, ""
    for i in range(trials):
        P = _sample_body(oracle.n, rng)
        eta = random_patch(oracle.n, rng)
        theta = random_rotation(oracle.n, rng, proper=not improper)
        lhs = oracle.eval(P.transform(theta), eta.transform(theta))
        rhs = rotate(oracle.eval(P, eta), theta)
        res = _coeff_residual(lhs, rhs)
        if res > worst:
            worst = res
            flipped = _coeff_residual(lhs, -1.0 * rhs)
            detail = f"trial {i}" + (
                f"; sign-flipped residual {flipped:.2e}" if improper else ""
            )
    name = "rotation_covariance" + ("_improper" if improper else "")
    return AxiomCheck(name, worst <= tol, worst, tol, trials, detail)


def _check_valuation(oracle, rng, trials, tol):
    worst, detail = 0.0, ""
    n = oracle.n
    for i in range(trials):
        kind = rng.integers(0, 2)
        if kind == 0:
            pts = random_box_points(n, rng)
        else:
            pts = np.vstack([np.zeros(n), np.diag(rng.uniform(0.8, 1.6, size=n))])
        q = random_rotation(n, rng).matrix
        pts = pts @ q.T + rng.uniform(-0.3, 0.3, size=n)
        P = _memo_polytope(pts)
        center = P.vertices.mean(axis=0)
        a = rng.normal(size=n)
        a /= np.linalg.norm(a)
        c = float(a @ center + rng.uniform(-0.05, 0.05))
        p1 = clip_by_halfspaces(P, [(a, c)])
        p2 = clip_by_halfspaces(P, [(-a, -c)])
        if p1 is None or p2 is None or p1.intrinsic_dim < n or p2.intrinsic_dim < n:
            continue
        p12 = clip_by_halfspaces(P, [(a, c), (-a, -c)])
        eta = random_patch(n, rng)
        lhs = oracle.eval(p1, eta) + oracle.eval(p2, eta)
        rhs = oracle.eval(P, eta) + oracle.eval(p12, eta)
        res = _coeff_residual(lhs, rhs)
        if res > worst:
            worst, detail = res, f"trial {i}"
    return AxiomCheck("valuation_additivity", worst <= tol, worst, tol, trials, detail)


def _check_local_definedness(oracle, rng, trials, tol):
    """Boundary-sharing pairs: two boxes with a common corner configuration
    agree on patches confined to the shared part of the normal bundle."""
    worst, detail = 0.0, ""
    n = oracle.n
    for i in range(trials):
        a = rng.uniform(0.8, 1.4, size=n)
        b = a * rng.uniform(1.3, 2.0, size=n)
        q = random_rotation(n, rng).matrix
        t = rng.uniform(-0.4, 0.4, size=n)
        pts1 = _box_corners_sides(a) @ q.T + t
        pts2 = _box_corners_sides(b) @ q.T + t
        p1, p2 = _memo_polytope(pts1), _memo_polytope(pts2)
        margin = 0.45 * float(np.min(a))
        lo = rng.uniform(-0.3, -0.1, size=n)
        hi = rng.uniform(0.3 * margin, margin, size=n)
        beta = PositionPolytope(_box_corners_lo_hi(lo, hi) @ q.T + t)
        if rng.uniform() < 0.5:
            eta = SupportPatch([PatchPair(beta, NormalAll())], assume_disjoint=True)
        else:
            eta = SupportPatch(
                [PatchPair(beta, NormalCone(_random_cone_normals(n, rng)))],
                assume_disjoint=True,
            )
        res = _coeff_residual(oracle.eval(p1, eta), oracle.eval(p2, eta))
        if res > worst:
            worst, detail = res, f"trial {i}"
    return AxiomCheck("local_definedness", worst <= tol, worst, tol, trials, detail)


def _box_corners_sides(sides):
    n = len(sides)
    return np.array(
        [[sides[i] if mask >> i & 1 else 0.0 for i in range(n)] for mask in range(1 << n)]
    )


def _box_corners_lo_hi(lo, hi):
    n = len(lo)
    return np.array(
        [[hi[i] if mask >> i & 1 else lo[i] for i in range(n)] for mask in range(1 << n)]
    )


def axiom_report(
    oracle: ValuationOracle,
    seed: int,
    trials: int = 50,
    tolerance: float = 1e-7,
    include_improper: bool = False,
) -> AxiomReport:
    """Randomized checks of the measure, translation, rotation, valuation and
    local-definedness axioms.  Deterministic given the seed; failures land in
    the report rather than raising."""
    checks = []
    rng = np.random.default_rng(seed)
    checks.append(_check_measure_additivity(oracle, rng, trials, tolerance))
    rng = np.random.default_rng(seed + 1)
    checks.append(_check_translation(oracle, rng, trials, tolerance))
    rng = np.random.default_rng(seed + 2)
    checks.append(_check_rotation(oracle, rng, trials, tolerance))
    if include_improper:
        rng = np.random.default_rng(seed + 5)
        checks.append(_check_rotation(oracle, rng, trials, tolerance, improper=True))
    rng = np.random.default_rng(seed + 3)
    checks.append(_check_valuation(oracle, rng, trials, tolerance))
    rng = np.random.default_rng(seed + 4)
    checks.append(_check_local_definedness(oracle, rng, trials, tolerance))
    return AxiomReport(oracle.name or "<anonymous>", checks, seed)


def improper_rotation_behavior(oracle: ValuationOracle, seed: int, trials: int = 20):
    """Max residuals of val(theta P, theta eta) against +rotate(val) and
    -rotate(val) over seeded improper orthogonal maps."""
    rng = np.random.default_rng(seed)
    res_plus, res_minus = 0.0, 0.0
    for _ in range(trials):
        P = _sample_body(oracle.n, rng)
        eta = random_patch(oracle.n, rng)
        theta = random_rotation(oracle.n, rng, proper=False)
        lhs = oracle.eval(P.transform(theta), eta.transform(theta))
        r = rotate(oracle.eval(P, eta), theta)
        res_plus = max(res_plus, _coeff_residual(lhs, r))
        res_minus = max(res_minus, _coeff_residual(lhs, -1.0 * r))
    return {"covariant_residual": res_plus, "anticovariant_residual": res_minus}


# -- density extraction on flats ------------------------------------------------------


def _flat_box_polytope(subspace: Subspace, lo, hi):
    """Axis box [lo, hi]^k inside the subspace, as an ambient polytope."""
    k = subspace.dim
    if k == 0:
        return _memo_polytope(np.zeros((1, subspace.ambient_dim)))
    corners = _box_corners_lo_hi(np.full(k, lo), np.full(k, hi))
    pts = corners @ subspace.basis
    return _memo_polytope(pts)


def _region_patch_cone(region: SphericalRegion):
    """Ambient halfspace normals carving the region's cone out of R^n."""
    carrier = region.carrier
    rows = [carrier.basis.T @ g for g in region.constraints]
    comp = carrier.orthogonal_complement()
    for w in comp.basis:
        rows.append(w)
        rows.append(-w)
    return NormalCone(rows) if rows else NormalAll()


def extract_delta(
    oracle: ValuationOracle, subspace: Subspace, region: SphericalRegion, verify_tol=1e-9
) -> SymTensor:
    """The flat density: oracle value per unit k-volume on a box inside the
    flat, for a patch confined to the given normal region.

    Requires translation invariance (declared_degree 0).  Recomputes on an
    enlarged box and raises if the two disagree, which signals a valuation
    that is not locally defined or not translation invariant.
    """
    if oracle.declared_degree != 0:
        raise ValueError("flat densities need a translation-invariant valuation")
    k = subspace.dim
    if not 0 <= k <= oracle.n - 1:
        raise ValueError("flat dimension must be < n")
    nreg = _region_patch_cone(region)
    p_small = _flat_box_polytope(subspace, 0.0, 3.0)
    p_large = _flat_box_polytope(subspace, -1.0, 5.0)
    if k == 0:
        beta = PositionPolytope(np.zeros((1, oracle.n)))
        eta = SupportPatch([PatchPair(beta, nreg)], assume_disjoint=True)
        return oracle.eval(p_small, eta)
    beta = PositionPolytope(_box_corners_lo_hi(np.full(k, 1.0), np.full(k, 2.0)) @ subspace.basis)
    eta = SupportPatch([PatchPair(beta, nreg)], assume_disjoint=True)
    val = oracle.eval(p_small, eta)
    check = oracle.eval(p_large, eta)
    if _coeff_residual(val, check) > verify_tol:
        raise ValueError(
            "flat density depends on the supporting polytope; the valuation is "
            "not locally defined or not translation invariant"
        )
    return val


# -- representation fitting -------------------------------------------------------------


@dataclass
class DeltaFitResult:
    coefficients: list
    residual: float
    condition: float
    family: list = field(default_factory=list)

    def to_dict(self):
        return {
            "coefficients": [[label, float(c)] for label, c in self.coefficients],
            "residual": float(self.residual),
            "condition": float(self.condition),
        }


def _span_vector(subspace: Subspace):
    """Deterministic unit vector spanning a line (first nonzero coord > 0)."""
    v = subspace.basis[0]
    for x in v:
        if abs(x) > 1e-12:
            return v if x > 0 else -v
    raise ValueError("zero direction")


def random_flat_samples(n, k, count, seed=5):
    """Seeded (L, B) pairs: random k-dim subspaces with cone regions in the
    sphere of the orthogonal complement."""
    rng = np.random.default_rng(seed)
    out = []
    base = np.eye(n)[:k]
    for _ in range(count):
        theta = random_rotation(n, rng)
        L = Subspace(n, base @ theta.matrix.T) if k else Subspace.zero(n)
        carrier = L.orthogonal_complement()
        ncons = int(rng.integers(0, 3))
        cons = [rng.normal(size=n) for _ in range(ncons)]
        keep = [g for g in cons if np.linalg.norm(carrier.coords(g)) > 0.2]
        out.append((L, SphericalRegion(carrier, ambient_constraints=keep)))
    return out


def delta_family(n, k, p, include_orientation_terms=True):
    """Labels and evaluators of the spanning family for flat densities.

    Every member maps (L, B) to a SymTensor of rank p.  The generic family is
    {Q^a Q_L^{b-a} moment(u^{p-2b})}; dimension-specific extras follow the
    planar and spatial special cases (rot90 and vector-product weights).
    """
    members = []

    def q_pow(a):
        return sym_power(metric_tensor(n), a)

    if k == 0 and n >= 3:
        for j in range(p // 2 + 1):
            def run(L, B, j=j):
                return sym_product(q_pow(j), spherical_moment(B, p - 2 * j))
            members.append((f"Q^{j} u^{p - 2 * j}", run))
        return members
    if k == 0 and n == 2:
        for j in range(p + 1):
            if j % 2 == 1 and not include_orientation_terms:
                continue
            def run(L, B, j=j):
                return arc_mixed_spherical_moment(B, p - j, j)
            members.append((f"ubar^{j} u^{p - j}", run))
        return members
    if k == 1 and n == 3:
        for a in range(p // 2 + 1):
            for b in range(a, p // 2 + 1):
                def run(L, B, a=a, b=b):
                    ql = sym_power(metric_on_subspace(L), b - a)
                    return sym_product(sym_product(q_pow(a), ql), spherical_moment(B, p - 2 * b))
                members.append((f"Q^{a} Q_L^{b - a} u^{p - 2 * b}", run))
        hi = p // 2 - 1
        if include_orientation_terms:
            for a in range(hi + 1):
                for b in range(a, hi + 1):
                    def run(L, B, a=a, b=b):
                        v = _span_vector(L)
                        ql = sym_power(metric_on_subspace(L), b - a)
                        head = sym_product(sym_product(q_pow(a), ql), SymTensor.from_vector(v))
                        mom = spherical_moment(B, p - 2 * b - 2, weight=CrossWith(v))
                        return sym_product(head, mom)
                    members.append((f"Q^{a} Q_L^{b - a} v (v x u) u^{p - 2 * b - 2}", run))
        return members
    if k == 1 and n == 2:
        for a in range(p // 2 + 1):
            def run(L, B, a=a):
                return sym_product(q_pow(a), spherical_moment(B, p - 2 * a))
            members.append((f"Q^{a} u^{p - 2 * a}", run))
        if include_orientation_terms:
            for a in range((p - 1) // 2 + 1):
                def run(L, B, a=a):
                    return sym_product(
                        q_pow(a), spherical_moment(B, p - 2 * a - 1, weight=PerpComplement())
                    )
                members.append((f"Q^{a} ubar u^{p - 2 * a - 1}", run))
        return members
    # k >= 2 (any n) and k = 1 with n >= 4: the Q^a Q_L^{b-a} family
    for a in range(p // 2 + 1):
        for b in range(a, p // 2 + 1):
            def run(L, B, a=a, b=b):
                ql = sym_power(metric_on_subspace(L), b - a)
                return sym_product(sym_product(q_pow(a), ql), spherical_moment(B, p - 2 * b))
            members.append((f"Q^{a} Q_L^{b - a} u^{p - 2 * b}", run))
    return members


def fit_delta_representation(samples, n, k, p, include_orientation_terms=True) -> DeltaFitResult:
    """Least-squares fit of flat-density samples against the spanning family.

    samples: iterable of (Subspace L of dim k, SphericalRegion B in S_{L^perp},
    SymTensor value of rank p).  Returns global coefficients and the
    normalized residual; ill-conditioned designs are reported through the
    condition estimate.
    """
    samples = list(samples)
    members = delta_family(n, k, p, include_orientation_terms)
    flat = TensorFlattener(n, p, count=max(4, 2 * p + 2))
    rows_a, rows_y = [], []
    for L, B, value in samples:
        cols = [flat(run(L, B)) for _, run in members]
        rows_a.append(np.column_stack(cols))
        rows_y.append(flat(value))
    a = np.vstack(rows_a)
    y = np.concatenate(rows_y)
    coef, _, rank, sv = np.linalg.lstsq(a, y, rcond=None)
    resid = np.linalg.norm(a @ coef - y) / max(np.linalg.norm(y), 1e-30)
    cond = float(sv[0] / sv[-1]) if len(sv) and sv[-1] > 0 else float("inf")
    result = DeltaFitResult(
        coefficients=[(label, float(c)) for (label, _), c in zip(members, coef)],
        residual=float(resid),
        condition=cond,
        family=[label for label, _ in members],
    )
    if rank < len(members):
        result.coefficients.append(("<rank-deficient design>", float(rank)))
    return result


# -- basis-span decomposition --------------------------------------------------------------


@dataclass
class SampleSpec:
    """Deterministic sample design for decomposition and rank certification.

    Flat polytopes of every dimension with relint-confined product patches
    guarantee identifiability; a few full-dimensional bodies with general
    patches are mixed in.
    """

    n: int
    p: int
    seed: int = 7
    flats_per_dim: int = 3
    patches_per_flat: int = 2
    fulldim_bodies: int = 2
    tuples_per_sample: int = 4

    def build(self):
        rng = np.random.default_rng(self.seed)
        n = self.n
        samples = []
        for d in range(n):
            for _ in range(self.flats_per_dim):
                theta = random_rotation(n, rng)
                shift = rng.uniform(-0.5, 0.5, size=n)
                sides = rng.uniform(0.8, 1.6, size=max(d, 1))
                if d == 0:
                    pts = np.zeros((1, n))
                else:
                    corners = _box_corners_sides(sides[:d])
                    pts = np.column_stack([corners, np.zeros((len(corners), n - d))])
                pts = pts @ theta.matrix.T + shift
                P = _memo_polytope(pts)
                for _ in range(self.patches_per_flat):
                    if d == 0:
                        beta = PositionPolytope(pts[:1])
                    else:
                        lo = rng.uniform(0.1, 0.3, size=d) * sides[:d]
                        hi = rng.uniform(0.6, 0.9, size=d) * sides[:d]
                        corners = _box_corners_lo_hi(lo, hi)
                        corners = np.column_stack([corners, np.zeros((len(corners), n - d))])
                        beta = PositionPolytope(corners @ theta.matrix.T + shift)
                    omega = NormalCone(_random_cone_normals(n, rng, count=rng.integers(1, 3)))
                    samples.append((P, SupportPatch([PatchPair(beta, omega)], assume_disjoint=True)))
                samples.append((P, SupportPatch.everything()))
        for _ in range(self.fulldim_bodies):
            P = _sample_body(n, rng)
            samples.append((P, SupportPatch.everything()))
            samples.append((P, random_patch(n, rng)))
        return samples


@dataclass
class DecompositionResult:
    coefficients: dict
    residual: float
    sample_count: int
    condition: float

    def to_dict(self):
        return {
            "coefficients": [
                [d.to_dict(), float(c)] for d, c in self.coefficients.items()
            ],
            "residual": float(self.residual),
            "sample_count": int(self.sample_count),
            "condition": float(self.condition),
        }


def _basis_matrix(basis, samples, flat):
    cols = []
    for d in basis:
        col = []
        for P, eta in samples:
            col.append(flat(evaluate_basis_element(d, P, eta)))
        cols.append(np.concatenate(col))
    return np.column_stack(cols)


def decompose_on_basis(
    oracle: ValuationOracle,
    sample_spec: Optional[SampleSpec] = None,
    tol: float = 1e-7,
    kinds: Optional[set] = None,
) -> DecompositionResult:
    """Express an oracle in the enumerated basis by least squares over seeded
    samples, validating on a held-out half.

    `kinds` restricts the candidate basis (e.g. {"phi"}), which is how the
    impossibility of representing the extra valuations by the classical
    family is certified numerically.
    """
    spec = sample_spec or SampleSpec(oracle.n, oracle.p)
    basis = enumerate_basis(spec.n, spec.p)
    if kinds is not None:
        basis = [d for d in basis if d.kind in kinds]
    samples = spec.build()
    flat = TensorFlattener(spec.n, spec.p, count=spec.tuples_per_sample)
    a = _basis_matrix(basis, samples, flat)
    y = np.concatenate([flat(oracle.eval(P, eta)) for P, eta in samples])
    rows = np.arange(a.shape[0])
    train = rows % 2 == 0
    hold = ~train
    coef, _, rank, sv = np.linalg.lstsq(a[train], y[train], rcond=None)
    cond = float(sv[0] / sv[-1]) if len(sv) and sv[-1] > 0 else float("inf")
    if cond > 1e10:
        pass  # reported through the condition field
    pred = a[hold] @ coef
    denom = max(np.linalg.norm(y[hold]), np.linalg.norm(y[train]), 1e-30)
    resid = np.linalg.norm(pred - y[hold]) / denom
    return DecompositionResult(
        coefficients={d: float(c) for d, c in zip(basis, coef)},
        residual=float(resid),
        sample_count=len(samples),
        condition=cond,
    )


def independence_rank(n, p, seed=7, sample_spec: Optional[SampleSpec] = None):
    """Numeric rank of the basis evaluation matrix vs the enumerated count.

    Columns are normalized before the SVD; the rank cutoff is 1e-8 sigma_max.
    Returns (rank, expected_count, singular_values).
    """
    spec = sample_spec or SampleSpec(n, p, seed=seed)
    basis = enumerate_basis(n, p)
    samples = spec.build()
    flat = TensorFlattener(n, p, count=spec.tuples_per_sample)
    a = _basis_matrix(basis, samples, flat)
    if a.shape[0] < len(basis):
        raise ValueError("sample set too small to certify; increase the spec sizes")
    norms = np.linalg.norm(a, axis=0)
    norms[norms == 0] = 1.0
    sv = np.linalg.svd(a / norms, compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * sv[0]))
    return rank, len(basis), sv


# -- invariant-tensor decomposition -----------------------------------------------------------


def _adapted_rotation(subspace: Subspace):
    """Orthonormal rows: basis of L first, then basis of L^perp."""
    comp = subspace.orthogonal_complement()
    return np.vstack([subspace.basis, comp.basis]), comp


def rotation_fixing_complement(subspace: Subspace, block: np.ndarray) -> Rotation:
    """Extend an orthogonal map of L (given in L's basis coordinates) by the
    identity on L^perp."""
    b = subspace.basis
    n = subspace.ambient_dim
    return Rotation(np.eye(n) + b.T @ (block - np.eye(subspace.dim)) @ b)


def group_average_fixing_complement(t: SymTensor, subspace: Subspace, samples=None):
    """Average of t over rotations of L that fix L^perp pointwise.

    For dim L = 2 the circle average is computed on a uniform angle grid
    (exact for polynomial integrands once the grid beats the rank); for
    dim L = 3 a product quadrature over Euler angles is used.
    """
    k = subspace.dim
    if k < 2:
        raise ValueError("averaging needs dim L >= 2")
    total = SymTensor.zero(t.n, t.rank)
    if k == 2:
        count = samples or max(16, 2 * t.rank + 2)
        for i in range(count):
            ang = 2.0 * math.pi * i / count
            block = np.array(
                [[math.cos(ang), -math.sin(ang)], [math.sin(ang), math.cos(ang)]]
            )
            total = total + rotate(t, rotation_fixing_complement(subspace, block))
        return (1.0 / count) * total
    if k == 3:
        na = max(8, t.rank + 2)
        nb = 24
        nodes, weights = np.polynomial.legendre.leggauss(nb)
        wsum = 0.0
        for ia in range(na):
            alpha = 2.0 * math.pi * ia / na
            for ib in range(nb):
                beta = math.acos(float(nodes[ib]))
                for ic in range(na):
                    gamma = 2.0 * math.pi * ic / na
                    block = _euler_zyz(alpha, beta, gamma)
                    w = float(weights[ib])
                    wsum += w
                    total = total + w * rotate(
                        t, rotation_fixing_complement(subspace, block)
                    )
        return (1.0 / wsum) * total
    raise ValueError("averaging implemented for dim L in {2, 3}")


def _euler_zyz(alpha, beta, gamma):
    ca, sa = math.cos(alpha), math.sin(alpha)
    cb, sb = math.cos(beta), math.sin(beta)
    cc, sc = math.cos(gamma), math.sin(gamma)
    rz1 = np.array([[ca, -sa, 0], [sa, ca, 0], [0, 0, 1]])
    ry = np.array([[cb, 0, sb], [0, 1, 0], [-sb, 0, cb]])
    rz2 = np.array([[cc, -sc, 0], [sc, cc, 0], [0, 0, 1]])
    return rz1 @ ry @ rz2


@dataclass
class InvariantDecomposition:
    case: str
    components: dict  # j -> SymTensor on L^perp coordinates
    complement: Subspace
    direction: Optional[np.ndarray]
    residual: float

    def recompose(self, subspace: Subspace) -> SymTensor:
        n = subspace.ambient_dim
        rank = max(
            (2 * j if self.case == "a" else j) + c.rank for j, c in self.components.items()
        ) if self.components else 0
        total = None
        for j, comp in self.components.items():
            amb = pullback(comp, self.complement)
            if self.case == "a":
                head = sym_power(metric_on_subspace(subspace), j)
            else:
                head = vector_power(self.direction, j)
            term = sym_product(head, amb)
            total = term if total is None else total + term
        return total


def decompose_invariant_tensor(
    t: SymTensor, subspace: Subspace, invariance_tol: float = 1e-8
) -> InvariantDecomposition:
    """Split a tensor along a subspace per the classification lemma.

    Case (b), dim L = 1: exact coefficient grouping on powers of the
    v_L-coordinate; works for any tensor.  Case (a), dim L >= 2: requires
    invariance under rotations fixing L^perp (checked by group averaging) and
    solves least squares on the spanning family {Q_L^j pullback(E)}.
    """
    k = subspace.dim
    if k < 1:
        raise ValueError("need dim L >= 1")
    n = t.n
    rows, comp = _adapted_rotation(subspace)
    if k == 1:
        v = _span_vector(subspace)
        rows = np.vstack([v.reshape(1, -1), comp.basis])
        adapted = rotate(t, Rotation(rows))
        groups: dict = {}
        for idx, c in adapted.coeffs.items():
            j = sum(1 for i in idx if i == 1)
            rest = tuple(i - 1 for i in idx if i != 1)
            groups.setdefault(j, {})[rest] = groups.get(j, {}).get(rest, 0.0) + c
        components = {
            j: SymTensor(n - 1, t.rank - j, cf, validate=False) for j, cf in groups.items()
        }
        out = InvariantDecomposition("b", components, comp, v, 0.0)
        return out
    avg = group_average_fixing_complement(t, subspace)
    inv_resid = _coeff_residual(avg, t)
    if inv_resid > invariance_tol:
        raise ValueError(
            f"tensor is not invariant under rotations fixing L^perp "
            f"(averaging residual {inv_resid:.3e})"
        )
    # least squares on {Q_L^j (.) pullback(E_beta)}
    r = t.rank
    ql = metric_on_subspace(subspace)
    labels, columns = [], []
    for j in range(r // 2 + 1):
        rr = r - 2 * j
        for beta in itertools.combinations_with_replacement(range(1, n - k + 1), rr):
            e = SymTensor(n - k, rr, {tuple(beta): 1.0})
            term = sym_product(sym_power(ql, j), pullback(e, comp))
            labels.append((j, tuple(beta)))
            columns.append(term)
    keys = sorted(set().union(*[set(c.coeffs) for c in columns], set(t.coeffs)))
    a = np.array([[c.coeffs.get(key, 0.0) for c in columns] for key in keys])
    y = np.array([t.coeffs.get(key, 0.0) for key in keys])
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    comps: dict = {}
    for (j, beta), c in zip(labels, coef):
        cur = comps.setdefault(j, {})
        cur[beta] = cur.get(beta, 0.0) + float(c)
    components = {
        j: SymTensor(n - k, r - 2 * j, cf, validate=False) for j, cf in comps.items()
    }
    out = InvariantDecomposition("a", components, comp, None, 0.0)
    recomposed = out.recompose(subspace)
    out.residual = _coeff_residual(recomposed, t)
    return out
