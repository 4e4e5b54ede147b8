"""Minkowski tensors and rotation-covariant local tensor valuations on
convex polytopes, with a numerical classification layer."""

from .symtensor import (
    Rotation,
    Subspace,
    SymTensor,
    evaluate,
    from_polynomial,
    metric_on_subspace,
    metric_tensor,
    pullback,
    rotate,
    sym_product,
    to_polynomial,
    vector_power,
)
from .integrate import (
    CrossWith,
    PerpComplement,
    QuadratureConfig,
    SphericalRegion,
    intersect_with_cone,
    omega,
    polytope_moment,
    spherical_measure,
    spherical_moment,
)
from .polytopes import (
    Face,
    GeometryError,
    NormalAll,
    NormalCone,
    PatchPair,
    Polytope,
    PositionAll,
    PositionBox,
    PositionPolytope,
    SupportPatch,
    build_polytope,
    edge_unit_vector,
    normal_bundle_contains,
    normal_cone,
    oriented_complement,
)
from .valuations import (
    BasisDescriptor,
    enumerate_basis,
    evaluate_basis_element,
    minkowski_tensor,
    normalizing_constant,
    phi,
    phi_tilde_2d,
    phi_tilde_3d,
    q_power_multiply,
)
from .analysis import (
    AxiomReport,
    SampleSpec,
    ValuationOracle,
    axiom_report,
    decompose_invariant_tensor,
    decompose_on_basis,
    extract_delta,
    fit_delta_representation,
    independence_rank,
)

__version__ = "0.1.0"
