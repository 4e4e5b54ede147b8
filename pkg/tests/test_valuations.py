import math

import numpy as np
import pytest

from conftest import coeff_residual
from minktens.analysis import random_rotation
from minktens.integrate import omega
from minktens.polytopes import (
    NormalAll,
    NormalCone,
    PatchPair,
    PositionAll,
    PositionBox,
    SupportPatch,
    build_polytope,
)
from minktens.symtensor import SymTensor, metric_tensor, rotate, sym_product, vector_power
from minktens.valuations import (
    BasisDescriptor,
    enumerate_basis,
    evaluate_basis_element,
    minkowski_tensor,
    normalizing_constant,
    phi,
    phi_tilde_2d,
    phi_tilde_3d,
    q_power_multiply,
    translation_family,
)

ALL = SupportPatch.everything()


def vertex_patch(point, pad=0.1):
    point = np.asarray(point, dtype=float)
    return SupportPatch(
        [PatchPair(PositionBox(point - pad, point + pad), NormalAll())],
        assume_disjoint=True,
    )


class TestConstants:
    def test_values(self):
        assert normalizing_constant(3, 2, 0, 0) == pytest.approx(0.5)
        assert normalizing_constant(2, 1, 0, 1) == pytest.approx(1 / (2 * math.pi))
        assert normalizing_constant(3, 1, 1, 1) == pytest.approx(1 / (4 * math.pi))

    def test_range(self):
        with pytest.raises(ValueError):
            normalizing_constant(3, 3, 0, 0)


class TestPhi:
    def test_cube_binomials(self, cube):
        for k, expected in ((0, 1.0), (1, 3.0), (2, 3.0)):
            val = phi(cube, ALL, k, 0, 0, 0)
            assert val.coeffs.get((), 0.0) == pytest.approx(expected, abs=1e-8)

    def test_minkowski_relation(self, cube, square):
        assert phi(cube, ALL, 2, 0, 1, 0).is_zero(1e-12)
        assert phi(square, ALL, 1, 0, 1, 0).is_zero(1e-12)

    def test_square_vertex_angle(self, square):
        val = phi(square, vertex_patch([1, 1]), 0, 0, 0, 0)
        assert val.coeffs.get((), 0.0) == pytest.approx(0.25, abs=1e-12)

    def test_j_weighting_on_edges(self, cube):
        # k=1, j=1: each edge contributes Q_{L(F)} times measure; trace equals
        # the j=0 scalar value since Q_{L(F)} has unit trace on an edge
        val = phi(cube, ALL, 1, 0, 0, 1)
        scalar = phi(cube, ALL, 1, 0, 0, 0).coeffs[()]
        trace = sum(val.coeffs.get((i, i), 0.0) for i in (1, 2, 3))
        assert trace == pytest.approx(scalar, abs=1e-10)

    def test_k0_requires_j0(self, cube):
        with pytest.raises(ValueError):
            phi(cube, ALL, 0, 0, 0, 1)

    def test_k_range(self, cube):
        with pytest.raises(ValueError):
            phi(cube, ALL, 3, 0, 0, 0)

    def test_segment_in_plane(self, segment2):
        # a 1-polytope in R^2: F_1 = {P}, nu = {+-e2}; s=1 cancels, s=0 gives
        # the normalized length times the two-point measure
        val = phi(segment2, ALL, 1, 0, 0, 0)
        assert val.coeffs.get((), 0.0) == pytest.approx(2 * 1.0 * normalizing_constant(2, 1, 0, 0))
        assert phi(segment2, ALL, 1, 0, 1, 0).is_zero(1e-12)


class TestMinkowskiTensor:
    def test_cube_intrinsic_volumes(self, cube):
        for k, expected in ((0, 1.0), (1, 3.0), (2, 3.0)):
            val = minkowski_tensor(cube, k, 0, 0)
            assert val.coeffs.get((), 0.0) == pytest.approx(expected, abs=1e-8)

    def test_box_intrinsic_volumes(self):
        sides = np.array([0.5, 1.25, 2.0])
        pts = [[sides[0] * a, sides[1] * b, sides[2] * c] for a in (0, 1) for b in (0, 1) for c in (0, 1)]
        box = build_polytope(pts)
        e1 = sides.sum()
        e2 = sides[0] * sides[1] + sides[0] * sides[2] + sides[1] * sides[2]
        for k, expected in ((0, 1.0), (1, e1), (2, e2)):
            val = minkowski_tensor(box, k, 0, 0)
            assert val.coeffs.get((), 0.0) == pytest.approx(expected, abs=1e-8)

    def test_normal_integral_vanishes(self):
        rng = np.random.default_rng(1)
        p = build_polytope(rng.normal(size=(8, 3)))
        assert minkowski_tensor(p, 2, 0, 1).is_zero(1e-10)

    def test_euler_mass(self):
        rng = np.random.default_rng(2)
        p = build_polytope(rng.normal(size=(7, 2)))
        assert minkowski_tensor(p, 0, 0, 0).coeffs[()] == pytest.approx(1.0, abs=1e-9)


class TestTilde3:
    def test_cube_everything_cancels(self, cube):
        assert phi_tilde_3d(cube, ALL, 0, 0, 0).is_zero(1e-10)

    def test_single_edge_quarter_arc(self, cube):
        # select the vertical edge at x=y=1 through its full normal cone; the
        # neighboring edges meet the open cone in measure-zero arcs
        patch = SupportPatch(
            [PatchPair(PositionAll(), NormalCone([[1, 0, 0], [0, 1, 0]]))],
            assume_disjoint=True,
        )
        val = phi_tilde_3d(cube, patch, 0, 0, 0)
        expected = SymTensor(3, 2, {(2, 3): 1.0, (1, 3): -1.0})
        assert coeff_residual(val, expected) < 1e-12

    def test_empty_patch(self, cube):
        patch = SupportPatch(
            [PatchPair(PositionBox([5, 5, 5], [6, 6, 6]), NormalAll())],
            assume_disjoint=True,
        )
        assert phi_tilde_3d(cube, patch, 0, 0, 0).is_zero()

    def test_needs_dimension_three(self, square):
        with pytest.raises(ValueError):
            phi_tilde_3d(square, ALL, 0, 0, 0)

    def test_sign_flip_invariance(self, cube, monkeypatch):
        # recompute with every edge direction negated; values must not move
        import minktens.valuations as V

        patch = SupportPatch(
            [PatchPair(PositionBox([-0.2, -0.2, -0.2], [0.7, 1.2, 0.6]), NormalAll())],
            assume_disjoint=True,
        )
        base = phi_tilde_3d(cube, patch, 1, 1, 1)
        orig = V.edge_unit_vector
        monkeypatch.setattr(V, "edge_unit_vector", lambda p, f: -orig(p, f))
        flipped = phi_tilde_3d(cube, patch, 1, 1, 1)
        assert coeff_residual(base, flipped) < 1e-12

    def test_segment_full_circle(self):
        # an isolated segment in R^3: its own normal cone is a full circle and
        # the cross-product integrand integrates to zero there
        seg = build_polytope([[0.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
        assert phi_tilde_3d(seg, ALL, 0, 0, 0).is_zero(1e-12)


class TestTilde2:
    def test_segment_one_normal(self, segment2):
        patch = SupportPatch(
            [PatchPair(PositionAll(), NormalCone([[0, 1]]))], assume_disjoint=True
        )
        val = phi_tilde_2d(segment2, patch, 1, 0, 0)
        assert coeff_residual(val, SymTensor(2, 1, {(1,): -1.0})) < 1e-12

    def test_segment_both_normals_cancel(self, segment2):
        assert phi_tilde_2d(segment2, ALL, 1, 0, 0).is_zero(1e-15)

    def test_square_vertex(self, square):
        val = phi_tilde_2d(square, vertex_patch([1, 1]), 0, 0, 0)
        expected = SymTensor(2, 1, {(1,): -1.0, (2,): 1.0})
        assert coeff_residual(val, expected) < 1e-12

    def test_bad_k(self, square):
        with pytest.raises(ValueError):
            phi_tilde_2d(square, ALL, 2, 0, 0)

    def test_needs_dimension_two(self, cube):
        with pytest.raises(ValueError):
            phi_tilde_2d(cube, ALL, 0, 0, 0)


class TestQPower:
    def test_identity(self):
        t = SymTensor(2, 1, {(1,): 2.0})
        assert q_power_multiply(0, t) is t

    def test_scalar_to_q(self):
        assert q_power_multiply(1, SymTensor.scalar(2, 1.0)).allclose(metric_tensor(2))

    def test_commutes_with_rotation(self):
        rng = np.random.default_rng(3)
        t = SymTensor(3, 1, {(1,): 1.0, (3,): -2.0})
        theta = random_rotation(3, rng)
        lhs = rotate(q_power_multiply(2, t), theta)
        rhs = q_power_multiply(2, rotate(t, theta))
        assert coeff_residual(lhs, rhs) < 1e-12


class TestBasisDescriptors:
    @pytest.mark.parametrize(
        "n,p,expected", [(3, 0, 3), (3, 1, 6), (3, 2, 14), (3, 3, 22), (2, 1, 6), (2, 2, 12)]
    )
    def test_counts(self, n, p, expected):
        assert len(enumerate_basis(n, p)) == expected

    def test_rank_relation(self):
        for n in (2, 3, 4):
            for p in range(4):
                for d in enumerate_basis(n, p):
                    assert d.rank == p

    def test_no_tilde_above_three(self):
        assert all(d.kind == "phi" for d in enumerate_basis(4, 3))

    def test_j_excluded_at_extremes(self):
        for d in enumerate_basis(3, 4):
            if d.kind == "phi" and d.k in (0, 2):
                assert d.j == 0

    def test_serialization_round_trip(self):
        for d in enumerate_basis(3, 2) + enumerate_basis(2, 2):
            back = BasisDescriptor.from_dict(d.to_dict(), d.n)
            assert back == d

    def test_invalid_descriptors(self):
        with pytest.raises(ValueError):
            BasisDescriptor("phi", 3, 0, 0, 0, k=0, j=1).validate()
        with pytest.raises(ValueError):
            BasisDescriptor("tilde3", 2, 0, 0, 0, j=0).validate()
        with pytest.raises(ValueError):
            BasisDescriptor("tilde2", 2, 0, 0, 0, k=2).validate()

    def test_evaluate_dispatch(self, cube, square):
        d = BasisDescriptor("phi", 3, 0, 0, 0, k=1, j=0)
        assert evaluate_basis_element(d, cube, ALL).coeffs[()] == pytest.approx(3.0, abs=1e-10)
        d3 = BasisDescriptor("tilde3", 3, 0, 0, 0, j=0)
        assert evaluate_basis_element(d3, cube, ALL).is_zero(1e-10)
        d2 = BasisDescriptor("tilde2", 2, 1, 0, 0, k=0)
        val = evaluate_basis_element(d2, square, vertex_patch([1, 1]))
        expected = sym_product(metric_tensor(2), SymTensor(2, 1, {(1,): -1.0, (2,): 1.0}))
        assert coeff_residual(val, expected) < 1e-12


class TestAxioms:
    def test_patch_additivity_exact(self, cube):
        g = np.array([0.3, -0.7, 0.64])
        g /= np.linalg.norm(g)
        eta1 = SupportPatch([PatchPair(PositionAll(), NormalCone([g]))], assume_disjoint=True)
        eta2 = SupportPatch([PatchPair(PositionAll(), NormalCone([-g]))], assume_disjoint=True)
        both = SupportPatch(eta1.pairs + eta2.pairs, assume_disjoint=True)
        for d in enumerate_basis(3, 2)[:6]:
            v1 = evaluate_basis_element(d, cube, eta1)
            v2 = evaluate_basis_element(d, cube, eta2)
            v = evaluate_basis_element(d, cube, both)
            assert coeff_residual(v1 + v2, v) < 1e-9

    def test_translation_law_phi(self, cube):
        # the normalized family translates with t^i / i!
        t = np.array([0.25, -0.4, 0.6])
        d = BasisDescriptor("phi", 3, 0, 2, 1, k=1, j=0)
        moved = evaluate_basis_element(d, cube.translate(t), ALL.translate(t))
        expected = None
        for i, lower, coef in translation_family(d):
            term = coef * sym_product(
                vector_power(t, i), evaluate_basis_element(lower, cube, ALL)
            )
            expected = term if expected is None else expected + term
        assert coeff_residual(moved, expected) < 1e-9

    def test_translation_law_tilde3(self, cube):
        # the unnormalized family translates with binom(r, i) t^i
        t = np.array([-0.3, 0.2, 0.45])
        d = BasisDescriptor("tilde3", 3, 0, 2, 0, j=0)
        patch = SupportPatch(
            [PatchPair(PositionAll(), NormalCone([[1, 0, 0], [0, 1, 0]]))],
            assume_disjoint=True,
        )
        moved = evaluate_basis_element(d, cube.translate(t), patch.translate(t))
        expected = None
        for i, lower, coef in translation_family(d):
            term = coef * sym_product(
                vector_power(t, i), evaluate_basis_element(lower, cube, patch)
            )
            expected = term if expected is None else expected + term
        assert coeff_residual(moved, expected) < 1e-9

    def test_translation_invariance_r0(self, cube):
        t = np.array([0.1, 0.9, -0.35])
        d = BasisDescriptor("phi", 3, 0, 0, 2, k=0, j=0)
        a = evaluate_basis_element(d, cube, ALL)
        b = evaluate_basis_element(d, cube.translate(t), ALL.translate(t))
        assert coeff_residual(a, b) < 1e-9

    @pytest.mark.parametrize("seed", range(3))
    def test_proper_rotation_covariance(self, cube, seed):
        rng = np.random.default_rng(200 + seed)
        theta = random_rotation(3, rng)
        eta = SupportPatch(
            [PatchPair(PositionBox([-0.2] * 3, [0.8, 1.3, 0.8]), NormalCone([[0.2, -1, 0.4]]))],
            assume_disjoint=True,
        )
        for d in (
            BasisDescriptor("phi", 3, 0, 1, 1, k=1, j=0),
            BasisDescriptor("tilde3", 3, 0, 0, 1, j=0),
        ):
            lhs = evaluate_basis_element(d, cube.transform(theta), eta.transform(theta))
            rhs = rotate(evaluate_basis_element(d, cube, eta), theta)
            assert coeff_residual(lhs, rhs) < 1e-8

    @pytest.mark.parametrize("seed", range(3))
    def test_reflection_dichotomy(self, cube, square, seed):
        rng = np.random.default_rng(300 + seed)
        eta3 = SupportPatch(
            [PatchPair(PositionBox([-0.3] * 3, [1.2, 0.7, 1.2]), NormalAll())],
            assume_disjoint=True,
        )
        theta = random_rotation(3, rng, proper=False)
        d_phi = BasisDescriptor("phi", 3, 0, 0, 2, k=1, j=0)
        lhs = evaluate_basis_element(d_phi, cube.transform(theta), eta3.transform(theta))
        rhs = rotate(evaluate_basis_element(d_phi, cube, eta3), theta)
        assert coeff_residual(lhs, rhs) < 1e-8
        d_t3 = BasisDescriptor("tilde3", 3, 0, 1, 0, j=0)
        lhs = evaluate_basis_element(d_t3, cube.transform(theta), eta3.transform(theta))
        rhs = rotate(evaluate_basis_element(d_t3, cube, eta3), theta)
        assert coeff_residual(lhs, -1.0 * rhs) < 1e-8
        theta2 = random_rotation(2, rng, proper=False)
        eta2 = SupportPatch(
            [PatchPair(PositionBox([-0.5, -0.5], [0.8, 1.4]), NormalAll())],
            assume_disjoint=True,
        )
        d_t2 = BasisDescriptor("tilde2", 2, 0, 1, 0, k=1)
        lhs = evaluate_basis_element(d_t2, square.transform(theta2), eta2.transform(theta2))
        rhs = rotate(evaluate_basis_element(d_t2, square, eta2), theta2)
        assert coeff_residual(lhs, -1.0 * rhs) < 1e-8

    def test_valuation_property(self, cube):
        from minktens.polytopes import clip_by_halfspaces

        a = np.array([0.5, 0.7, -0.5])
        a /= np.linalg.norm(a)
        c = float(a @ np.full(3, 0.5))
        p1 = clip_by_halfspaces(cube, [(a, c)])
        p2 = clip_by_halfspaces(cube, [(-a, -c)])
        p12 = clip_by_halfspaces(cube, [(a, c), (-a, -c)])
        eta = SupportPatch(
            [PatchPair(PositionBox([-1] * 3, [2, 2, 0.8]), NormalCone([[0.1, 0.2, 1.0]]))],
            assume_disjoint=True,
        )
        for d in (
            BasisDescriptor("phi", 3, 0, 0, 1, k=0, j=0),
            BasisDescriptor("phi", 3, 0, 1, 0, k=2, j=0),
            BasisDescriptor("tilde3", 3, 0, 0, 0, j=0),
        ):
            lhs = evaluate_basis_element(d, p1, eta) + evaluate_basis_element(d, p2, eta)
            rhs = evaluate_basis_element(d, cube, eta) + evaluate_basis_element(d, p12, eta)
            assert coeff_residual(lhs, rhs) < 1e-8

    def test_local_definedness_pair(self):
        small = build_polytope([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)])
        wide = build_polytope([[x, y, z] for x in (0, 2) for y in (0, 1.5) for z in (0, 1)])
        beta = PositionBox([-0.2, -0.2, -0.2], [0.4, 0.4, 0.4])
        eta = SupportPatch([PatchPair(beta, NormalAll())], assume_disjoint=True)
        for d in (
            BasisDescriptor("phi", 3, 0, 1, 1, k=1, j=0),
            BasisDescriptor("tilde3", 3, 0, 0, 0, j=0),
        ):
            a = evaluate_basis_element(d, small, eta)
            b = evaluate_basis_element(d, wide, eta)
            assert coeff_residual(a, b) < 1e-9
