import itertools
import math

import numpy as np
import pytest

from conftest import box_monomial_integral, brute_simplex_monomial, coeff_residual
from minktens import _quad
from minktens._quad import backends
from minktens.analysis import random_rotation
from minktens.integrate import (
    CrossWith,
    PerpComplement,
    QuadratureConfig,
    SphericalRegion,
    _arc_intervals,
    _trig_integral,
    intersect_with_cone,
    omega,
    polytope_moment,
    simplex_moment,
    spherical_measure,
    spherical_moment,
)
from minktens.polytopes import build_polytope
from minktens.symtensor import Subspace, metric_tensor, rotate


class TestOmega:
    def test_values(self):
        assert omega(2) == pytest.approx(2 * math.pi)
        assert omega(3) == pytest.approx(4 * math.pi)
        assert omega(1) == pytest.approx(2.0)
        assert omega(4) == pytest.approx(2 * math.pi ** 2)

    def test_invalid(self):
        with pytest.raises(ValueError):
            omega(0)


class TestPolytopeMoments:
    def test_segment_length(self):
        seg = build_polytope([[0.0, 0.0], [1.0, 0.0]])
        assert polytope_moment(seg, 0).coeffs == {(): 1.0}

    def test_segment_first_moment(self):
        seg = build_polytope([[0.0, 0.0], [1.0, 0.0]])
        assert polytope_moment(seg, 1).coeffs == {(1,): 0.5}

    def test_square_centroid(self, square):
        m = polytope_moment(square, 1)
        assert m.coeffs == {(1,): pytest.approx(0.5), (2,): pytest.approx(0.5)}

    @pytest.mark.parametrize("seed", range(3))
    @pytest.mark.parametrize("r", [0, 1, 2, 3])
    def test_box_moments_vs_product_oracle(self, seed, r):
        rng = np.random.default_rng(seed)
        n = 2 + seed % 2
        lo = rng.uniform(-1, 0, size=n)
        hi = lo + rng.uniform(0.5, 1.5, size=n)
        corners = np.array(list(itertools.product(*zip(lo, hi))))
        box = build_polytope(corners)
        m = polytope_moment(box, r)
        for idx in itertools.combinations_with_replacement(range(1, n + 1), r):
            alpha = [idx.count(i + 1) for i in range(n)]
            mult = math.factorial(r)
            for a in alpha:
                mult //= math.factorial(a)
            expected = mult * box_monomial_integral(lo, hi, alpha)
            assert m.coeffs.get(idx, 0.0) == pytest.approx(expected, abs=1e-10)

    @pytest.mark.parametrize("seed", range(3))
    def test_simplex_moment_vs_bruteforce(self, seed):
        rng = np.random.default_rng(100 + seed)
        k = 1 + seed % 3
        n = 3
        verts = rng.normal(size=(k + 1, n))
        for r in (1, 2, 3):
            m = simplex_moment(verts, r)
            for idx in itertools.combinations_with_replacement(range(1, n + 1), r):
                alpha = [idx.count(i + 1) for i in range(n)]
                mult = math.factorial(r)
                for a in alpha:
                    mult //= math.factorial(a)
                expected = mult * brute_simplex_monomial(verts, alpha)
                assert m.coeffs.get(idx, 0.0) == pytest.approx(expected, abs=1e-10)

    def test_point_region(self):
        pt = build_polytope([[0.25, 0.75]])
        assert polytope_moment(pt, 2).coeffs[(1, 2)] == pytest.approx(2 * 0.25 * 0.75)


class TestSphericalClosedForms:
    def test_full_circle_s2(self):
        t = spherical_moment(SphericalRegion.full_sphere(2), 2)
        assert t.coeffs[(1, 1)] == pytest.approx(math.pi, abs=1e-12)
        assert t.coeffs[(2, 2)] == pytest.approx(math.pi, abs=1e-12)
        assert abs(t.coeffs.get((1, 2), 0.0)) < 1e-12

    def test_quarter_arc_cross_weight(self):
        carrier = Subspace(3, np.array([[1.0, 0, 0], [0, 1, 0]]))
        region = SphericalRegion(carrier, ambient_constraints=[[1, 0, 0], [0, 1, 0]])
        t = spherical_moment(region, 0, weight=CrossWith((0, 0, 1)))
        assert t.coeffs[(2,)] == pytest.approx(1.0, abs=1e-12)
        assert t.coeffs[(1,)] == pytest.approx(-1.0, abs=1e-12)

    def test_full_sphere_odd_zero(self):
        assert spherical_moment(SphericalRegion.full_sphere(3), 1).is_zero(1e-12)

    def test_full_sphere_s2(self):
        t = spherical_moment(SphericalRegion.full_sphere(3), 2)
        expected = (omega(3) / 3.0) * metric_tensor(3)
        assert coeff_residual(t, expected) < 1e-8

    def test_full_measures(self):
        for n in (2, 3, 4):
            assert spherical_measure(SphericalRegion.full_sphere(n)) == pytest.approx(
                omega(n), abs=1e-7
            )

    def test_s3_moments(self):
        t = spherical_moment(SphericalRegion.full_sphere(4), 2)
        expected = (omega(4) / 4.0) * metric_tensor(4)
        assert coeff_residual(t, expected) < 1e-6

    def test_point_regions(self):
        carrier = Subspace(2, np.array([[0.0, 1.0]]))
        both = SphericalRegion(carrier)
        assert spherical_moment(both, 0).coeffs == {(): 2.0}
        assert spherical_moment(both, 1).is_zero()
        assert spherical_moment(both, 2).coeffs == {(2, 2): 2.0}
        only_up = SphericalRegion(carrier, ambient_constraints=[[0, 1]])
        t = spherical_moment(only_up, 0, weight=PerpComplement())
        assert t.coeffs == {(1,): -1.0}


class TestRegionAlgebra:
    def test_intersect_noop(self):
        carrier = Subspace(3, np.array([[1.0, 0, 0], [0, 1, 0]]))
        region = SphericalRegion(carrier, ambient_constraints=[[1, 0, 0], [0, 1, 0]])
        same = intersect_with_cone(region, [[1, 0, 0]])
        assert spherical_measure(same) == pytest.approx(spherical_measure(region), abs=1e-12)

    def test_intersect_empty(self):
        octant = SphericalRegion(
            Subspace.full(3), ambient_constraints=[[1, 0, 0], [0, 1, 0], [0, 0, 1]]
        )
        empty = intersect_with_cone(octant, [[-1, 0, 0], [0, -1, 0], [0, 0, -1]])
        assert spherical_measure(empty) == pytest.approx(0.0, abs=1e-12)

    def test_degenerate_has_measure_zero(self):
        # two opposite halfspaces leave a great circle: H^2-null by fiat
        region = intersect_with_cone(
            SphericalRegion.full_sphere(3), [[0, 0, 1], [0, 0, -1]]
        )
        assert spherical_measure(region) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(4))
    def test_additivity_random_split(self, seed):
        rng = np.random.default_rng(seed)
        octant = SphericalRegion(
            Subspace.full(3), ambient_constraints=[[1, 0, 0], [0, 1, 0], [0, 0, 1]]
        )
        g = rng.normal(size=3)
        g /= np.linalg.norm(g)
        r1 = intersect_with_cone(octant, [g])
        r2 = intersect_with_cone(octant, [-g])
        for s in (0, 1, 2, 3):
            whole = spherical_moment(octant, s)
            parts = spherical_moment(r1, s) + spherical_moment(r2, s)
            assert coeff_residual(whole, parts) < 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_rotation_equivariance(self, seed):
        rng = np.random.default_rng(40 + seed)
        theta = random_rotation(3, rng)
        cons = [[-1, 0, 0], [0, -1, 0], [0, 0, -1]]
        base = SphericalRegion(Subspace.full(3), ambient_constraints=cons)
        moved = SphericalRegion(
            Subspace.full(3), ambient_constraints=[theta.apply(g) for g in np.array(cons, float)]
        )
        for s in (0, 2, 3):
            lhs = spherical_moment(moved, s)
            rhs = rotate(spherical_moment(base, s), theta)
            assert coeff_residual(lhs, rhs) < 1e-8


class TestTrigIntegrals:
    @pytest.mark.parametrize("a,b", [(0, 0), (1, 0), (0, 1), (1, 1), (2, 0), (2, 3), (4, 2), (5, 5)])
    def test_against_quadrature(self, a, b):
        lo, hi = 0.3, 2.1
        xs = np.linspace(lo, hi, 20001)
        ys = np.cos(xs) ** a * np.sin(xs) ** b
        approx = np.trapezoid(ys, xs)
        assert _trig_integral(a, b, lo, hi) == pytest.approx(approx, abs=1e-8)


class TestAdaptiveEngines:
    def test_backends_agree(self):
        table = backends()
        verts = np.array([[[1.0, 0, 0], [0, 1, 0], [0, 0, 1]]])
        exps = np.array([[0, 0, 0], [2, 0, 0], [1, 1, 1], [0, 3, 0]])
        bary, w = _quad.rule(3)
        results = {
            name: impl.integrate_spherical_simplices(verts, exps, bary, w, 1e-10)
            for name, impl in table.items()
        }
        vals = list(results.values())
        for other in vals[1:]:
            assert np.max(np.abs(vals[0] - other)) < 1e-12

    def test_rules_are_degree_five(self):
        # every fixed rule must integrate flat-simplex monomials of degree <= 5
        rng = np.random.default_rng(9)
        for m in (2, 3, 4):
            bary, w = _quad.rule(m)
            verts = rng.normal(size=(m, m - 1))
            # integrate monomials over the flat simplex directly via the rule
            for alpha in itertools.combinations_with_replacement(range(m - 1), 5):
                coeffs = [alpha.count(d) for d in range(m - 1)]
                pts = bary @ verts
                vals = np.prod(pts ** np.array(coeffs), axis=1)
                approx = float(w @ vals)
                exact = brute_simplex_monomial(verts, coeffs)
                edges = verts[1:] - verts[:1]
                vol = math.sqrt(max(np.linalg.det(edges @ edges.T), 0.0)) / math.factorial(m - 1)
                assert approx * vol == pytest.approx(exact, rel=1e-12, abs=1e-13)

    def test_arc_cross_validation(self):
        # the adaptive engine on chords must reproduce the closed-form arcs
        rng = np.random.default_rng(11)
        for _ in range(25):
            lo = rng.uniform(0, 2 * math.pi)
            length = rng.uniform(0.05, 1.2)
            hi = lo + length
            chord = np.array(
                [[[math.cos(lo), math.sin(lo)], [math.cos(hi), math.sin(hi)]]]
            )
            exps = np.array([[a, b] for a in range(4) for b in range(4 - a)])
            got = _quad.integrate_spherical_simplices(chord, exps, 1e-12)
            expected = np.array([_trig_integral(a, b, lo, hi) for a, b in exps])
            assert np.max(np.abs(got - expected)) < 1e-10

    def test_s3_orthant(self):
        verts = np.array([np.eye(4)])
        got = _quad.integrate_spherical_simplices(verts, np.array([[0, 0, 0, 0]]), 1e-7)
        assert got[0] == pytest.approx(omega(4) / 16.0, abs=1e-7)

    def test_determinism(self):
        octant = SphericalRegion(
            Subspace.full(3), ambient_constraints=[[1, 0, 0], [0, 1, 0], [0, 0, 1]]
        )
        from minktens.integrate import clear_cache

        clear_cache()
        a = spherical_moment(octant, 3)
        clear_cache()
        b = spherical_moment(octant, 3)
        assert a.coeffs == b.coeffs


class TestArcIntervals:
    def test_full_circle(self):
        region = SphericalRegion.full_sphere(2)
        assert _arc_intervals(region) == (0.0, 2 * math.pi)

    def test_halfplane(self):
        region = SphericalRegion(Subspace.full(2), ambient_constraints=[[1, 0]])
        lo, hi = _arc_intervals(region)
        assert hi - lo == pytest.approx(math.pi)

    def test_antipodal_empty(self):
        region = SphericalRegion(
            Subspace.full(2), ambient_constraints=[[1, 0], [-1, 0]]
        )
        assert _arc_intervals(region) is None


class TestConfig:
    def test_tolerance_knob(self):
        rough = QuadratureConfig(tol_2d=1e-4)
        octant = SphericalRegion(
            Subspace.full(3), ambient_constraints=[[1, 0, 0], [0, 1, 0], [0, 0, 1]]
        )
        from minktens.integrate import clear_cache

        clear_cache()
        val = spherical_moment(octant, 0, config=rough)
        clear_cache()
        assert val.coeffs[()] == pytest.approx(math.pi / 2, abs=1e-4)
