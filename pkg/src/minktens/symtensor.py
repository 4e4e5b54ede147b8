"""Symmetric tensors on R^n in the homogeneous-polynomial model.

A symmetric rank-p tensor is stored sparsely as a mapping from nondecreasing
multi-indices (i_1 <= ... <= i_p, entries in 1..n) to real coefficients, so that
the tensor corresponds to the polynomial

    p_T(y) = sum_I  t_I * y_{i_1} * ... * y_{i_p}.

Under this identification the symmetric product is plain polynomial
multiplication, and the multilinear form is recovered by polarization with
1/p! averaging.  That normalization is the one that makes mixed evaluations
satisfy the binomial law

    (v^q (.) S)(v,...,v,x_1,...,x_{p-q}) = binom(p,q)^{-1} S(x_1,...,x_{p-q})

for a unit vector v and arguments x_i orthogonal to v.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SymTensor",
    "Subspace",
    "Rotation",
    "sym_product",
    "vector_power",
    "metric_tensor",
    "metric_on_subspace",
    "rotate",
    "evaluate",
    "to_polynomial",
    "from_polynomial",
    "pullback",
    "substitute",
]

ORTHO_TOL = 1e-12
SERIALIZE_CHOP = 1e-14


class TensorError(ValueError):
    """Raised on malformed tensor data or incompatible operands."""


def _check_index(idx, n, p):
    if len(idx) != p:
        raise TensorError(f"multi-index {idx} has length {len(idx)}, expected {p}")
    if any(not (1 <= i <= n) for i in idx):
        raise TensorError(f"multi-index {idx} out of range 1..{n}")
    if any(idx[m] > idx[m + 1] for m in range(len(idx) - 1)):
        raise TensorError(f"multi-index {idx} is not sorted nondecreasing")


class SymTensor:
    """Sparse symmetric tensor; immutable by convention after construction."""

    __slots__ = ("n", "rank", "coeffs")

    def __init__(self, n, rank, coeffs=None, validate=True):
        self.n = int(n)
        self.rank = int(rank)
        data = {}
        if coeffs:
            for idx, c in coeffs.items():
                idx = tuple(int(i) for i in idx)
                if validate:
                    _check_index(idx, self.n, self.rank)
                c = float(c)
                if c != 0.0:
                    data[idx] = data.get(idx, 0.0) + c
        self.coeffs = {k: v for k, v in data.items() if v != 0.0}

    # -- constructors -------------------------------------------------

    @staticmethod
    def zero(n, rank):
        return SymTensor(n, rank, {})

    @staticmethod
    def scalar(n, value):
        return SymTensor(n, 0, {(): float(value)} if value else {})

    @staticmethod
    def from_vector(x):
        x = np.asarray(x, dtype=float)
        return SymTensor(len(x), 1, {(i + 1,): x[i] for i in range(len(x)) if x[i] != 0.0})

    # -- basic algebra ------------------------------------------------

    def __add__(self, other):
        self._require_compatible(other, same_rank=True)
        out = dict(self.coeffs)
        for idx, c in other.coeffs.items():
            out[idx] = out.get(idx, 0.0) + c
        return SymTensor(self.n, self.rank, out, validate=False)

    def __sub__(self, other):
        return self + (-1.0) * other

    def __neg__(self):
        return (-1.0) * self

    def __mul__(self, scalar):
        scalar = float(scalar)
        return SymTensor(
            self.n, self.rank, {k: scalar * v for k, v in self.coeffs.items()}, validate=False
        )

    __rmul__ = __mul__

    def _require_compatible(self, other, same_rank=False):
        if not isinstance(other, SymTensor):
            raise TensorError(f"expected SymTensor, got {type(other).__name__}")
        if other.n != self.n:
            raise TensorError(f"ambient dimension mismatch: {self.n} vs {other.n}")
        if same_rank and other.rank != self.rank:
            raise TensorError(f"rank mismatch: {self.rank} vs {other.rank}")

    # -- queries --------------------------------------------------------

    def is_zero(self, tol=0.0):
        return all(abs(c) <= tol for c in self.coeffs.values())

    def norm(self):
        """Euclidean norm of the coefficient vector (a working norm, not the
        tensor Hilbert-Schmidt norm)."""
        return math.sqrt(sum(c * c for c in self.coeffs.values()))

    def allclose(self, other, tol=1e-12):
        self._require_compatible(other, same_rank=True)
        keys = set(self.coeffs) | set(other.coeffs)
        return all(abs(self.coeffs.get(k, 0.0) - other.coeffs.get(k, 0.0)) <= tol for k in keys)

    def poly_eval(self, x):
        """Evaluate the associated homogeneous polynomial at x in R^n."""
        x = np.asarray(x, dtype=float)
        total = 0.0
        for idx, c in self.coeffs.items():
            term = c
            for i in idx:
                term *= x[i - 1]
            total += term
        return total

    def __repr__(self):
        items = ", ".join(f"{idx}: {c:.6g}" for idx, c in sorted(self.coeffs.items()))
        return f"SymTensor(n={self.n}, rank={self.rank}, {{{items}}})"

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        """JSON-ready record; coefficients below 1e-14 in magnitude are omitted."""
        coeffs = {
            "[" + ",".join(str(i) for i in idx) + "]": c
            for idx, c in sorted(self.coeffs.items())
            if abs(c) >= SERIALIZE_CHOP
        }
        return {"n": self.n, "rank": self.rank, "coeffs": coeffs}

    @staticmethod
    def from_dict(record):
        try:
            n = int(record["n"])
            rank = int(record["rank"])
            raw = record.get("coeffs", {})
        except (KeyError, TypeError) as exc:
            raise TensorError(f"malformed tensor record: {exc}") from exc
        coeffs = {}
        for key, val in raw.items():
            body = key.strip()
            if not (body.startswith("[") and body.endswith("]")):
                raise TensorError(f"malformed multi-index key {key!r}")
            idx = tuple(int(t) for t in body[1:-1].split(",")) if body != "[]" else ()
            coeffs[idx] = float(val)
        return SymTensor(n, rank, coeffs)


# -- operations ------------------------------------------------------------


def sym_product(s, t):
    """Symmetric tensor product: the polynomial of the result is p_s * p_t."""
    s._require_compatible(t)
    out = {}
    for i1, c1 in s.coeffs.items():
        for i2, c2 in t.coeffs.items():
            idx = tuple(sorted(i1 + i2))
            out[idx] = out.get(idx, 0.0) + c1 * c2
    return SymTensor(s.n, s.rank + t.rank, out, validate=False)


def sym_power(t, m):
    """m-fold symmetric power of a tensor (m >= 0)."""
    out = SymTensor.scalar(t.n, 1.0)
    for _ in range(int(m)):
        out = sym_product(out, t)
    return out


def vector_power(x, r):
    """The tensor x^r, with polynomial <x, y>^r."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if r == 0:
        return SymTensor.scalar(n, 1.0)
    return sym_power(SymTensor.from_vector(x), r)


def metric_tensor(n):
    """Q on R^n, with polynomial sum_i y_i^2."""
    return SymTensor(n, 2, {(i, i): 1.0 for i in range(1, n + 1)})


def metric_on_subspace(subspace):
    """Q_L(a,b) = <pi_L a, pi_L b>, as sum_j <b_j, y>^2 over an orthonormal basis."""
    out = SymTensor.zero(subspace.ambient_dim, 2)
    for row in subspace.basis:
        out = out + vector_power(row, 2)
    return out


def substitute(t, linear_forms):
    """Replace each coordinate y_i by the linear form <w_i, z> on R^m.

    `linear_forms` is an array of shape (n, m): row i-1 is the vector w_i.
    Returns the rank-preserving image tensor on R^m.  Rotations, pullbacks and
    orthonormal changes of coordinates are all instances of this map.
    """
    w = np.asarray(linear_forms, dtype=float)
    if w.shape[0] != t.n:
        raise TensorError(f"substitution table has {w.shape[0]} rows, expected {t.n}")
    m = w.shape[1]
    out = {}
    for idx, c in t.coeffs.items():
        # expand the product of |idx| linear forms
        partial = {(): c}
        for i in idx:
            nxt = {}
            row = w[i - 1]
            for jdx, pc in partial.items():
                for j in range(m):
                    wj = row[j]
                    if wj == 0.0:
                        continue
                    key = tuple(sorted(jdx + (j + 1,)))
                    nxt[key] = nxt.get(key, 0.0) + pc * wj
            partial = nxt
        for jdx, pc in partial.items():
            out[jdx] = out.get(jdx, 0.0) + pc
    return SymTensor(m, t.rank, out, validate=False)


def rotate(t, theta):
    """Image of t under an orthogonal map: p_{theta t}(y) = p_t(theta^{-1} y).

    Improper maps are accepted; they are needed by the reflection tests.
    """
    mat = theta.matrix if isinstance(theta, Rotation) else np.asarray(theta, dtype=float)
    if mat.shape != (t.n, t.n):
        raise TensorError(f"rotation is {mat.shape}, tensor lives on R^{t.n}")
    # y_i composed with theta^{-1} equals <theta e_i, y>: substitute column i.
    return substitute(t, mat.T)


def evaluate(t, args):
    """The symmetric multilinear form at p = rank argument vectors.

    Uses the polarization identity with 1/p! averaging:
        T(x_1,..,x_p) = (1/p!) sum_{S nonempty} (-1)^{p-|S|} p_T(sum_{i in S} x_i).
    """
    p = t.rank
    if len(args) != p:
        raise TensorError(f"got {len(args)} arguments for a rank-{p} tensor")
    if p == 0:
        return t.coeffs.get((), 0.0)
    args = [np.asarray(a, dtype=float) for a in args]
    total = 0.0
    for mask in range(1, 1 << p):
        x = np.zeros(t.n)
        bits = 0
        for i in range(p):
            if mask >> i & 1:
                x += args[i]
                bits += 1
        total += (-1.0) ** (p - bits) * t.poly_eval(x)
    return total / math.factorial(p)


def to_polynomial(t):
    """Sorted list of (multi-index, coefficient) pairs."""
    return sorted(t.coeffs.items())


def from_polynomial(coeff_list, n, p):
    """Inverse of to_polynomial; validates every multi-index."""
    coeffs = {}
    for idx, c in coeff_list:
        idx = tuple(int(i) for i in idx)
        _check_index(idx, n, p)
        if idx in coeffs:
            raise TensorError(f"duplicate multi-index {idx}")
        coeffs[idx] = float(c)
    return SymTensor(n, p, coeffs)


def pullback(t_sub, subspace):
    """pi_L^* t_sub: the ambient tensor acting through orthogonal projection.

    `t_sub` must be expressed in the orthonormal basis coordinates of the
    subspace (ambient_dim == subspace.dim).
    """
    if t_sub.n != subspace.dim:
        raise TensorError(
            f"tensor lives on R^{t_sub.n} but the subspace has dimension {subspace.dim}"
        )
    if subspace.dim == 0:
        if t_sub.rank == 0:
            return SymTensor.scalar(subspace.ambient_dim, t_sub.coeffs.get((), 0.0))
        return SymTensor.zero(subspace.ambient_dim, t_sub.rank)
    # coordinate z_j pulls back to the ambient linear form <b_j, y>
    return substitute(t_sub, subspace.basis)


# -- supporting geometry types ----------------------------------------------


@dataclass(frozen=True)
class Subspace:
    """Linear subspace of R^n carried by an orthonormal basis (rows)."""

    ambient_dim: int
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        basis = np.atleast_2d(np.asarray(self.basis, dtype=float))
        if basis.size == 0:
            basis = np.zeros((0, self.ambient_dim))
        object.__setattr__(self, "basis", basis)
        if basis.shape[1] != self.ambient_dim:
            raise TensorError("basis vectors have wrong length")
        gram = basis @ basis.T
        if not np.allclose(gram, np.eye(basis.shape[0]), rtol=0.0, atol=ORTHO_TOL):
            raise TensorError("basis is not orthonormal within 1e-12")

    @property
    def dim(self):
        return self.basis.shape[0]

    @staticmethod
    def full(n):
        return Subspace(n, np.eye(n))

    @staticmethod
    def zero(n):
        return Subspace(n, np.zeros((0, n)))

    @staticmethod
    def span(vectors, ambient_dim=None, tol=1e-10):
        """Orthonormalize a spanning list (Gram-Schmidt, in the given order)."""
        vectors = [np.asarray(v, dtype=float) for v in vectors]
        if ambient_dim is None:
            if not vectors:
                raise TensorError("cannot infer ambient dimension from an empty list")
            ambient_dim = len(vectors[0])
        rows = []
        for v in vectors:
            w = v.copy()
            for r in rows:
                w -= np.dot(w, r) * r
            nw = np.linalg.norm(w)
            if nw > tol:
                rows.append(w / nw)
        if not rows:
            return Subspace.zero(ambient_dim)
        return Subspace(ambient_dim, np.vstack(rows))

    def orthogonal_complement(self):
        if self.dim == 0:
            return Subspace.full(self.ambient_dim)
        # null space via SVD; deterministic for a fixed input matrix
        _, _, vt = np.linalg.svd(self.basis)
        return Subspace(self.ambient_dim, vt[self.dim:])

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if self.dim == 0:
            return np.zeros(self.ambient_dim)
        return self.basis.T @ (self.basis @ x)

    def coords(self, x):
        """Coordinates of pi_L(x) in the basis of L."""
        return self.basis @ np.asarray(x, dtype=float)

    def contains(self, x, tol=1e-10):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x)) <= tol


@dataclass(frozen=True)
class Rotation:
    """Orthogonal map of R^n with cached determinant (+1 proper, -1 improper)."""

    matrix: np.ndarray = field(repr=False)
    determinant: float = field(init=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", mat)
        n = mat.shape[0]
        if mat.shape != (n, n):
            raise TensorError("rotation matrix must be square")
        if not np.allclose(mat.T @ mat, np.eye(n), rtol=0.0, atol=1e-12):
            raise TensorError("matrix is not orthogonal within 1e-12")
        det = float(np.linalg.det(mat))
        if not (abs(det - 1.0) < 1e-12 or abs(det + 1.0) < 1e-12):
            raise TensorError("determinant is not +-1 within 1e-12")
        object.__setattr__(self, "determinant", 1.0 if det > 0 else -1.0)

    @property
    def n(self):
        return self.matrix.shape[0]

    @property
    def is_proper(self):
        return self.determinant > 0

    def apply(self, x):
        return self.matrix @ np.asarray(x, dtype=float)

    def compose(self, other):
        """self after other."""
        return Rotation(self.matrix @ other.matrix)

    def inverse(self):
        return Rotation(self.matrix.T)

    @staticmethod
    def identity(n):
        return Rotation(np.eye(n))

    @staticmethod
    def plane_rotation(n, axis1, axis2, angle):
        """Rotation by `angle` in the (axis1, axis2) coordinate plane (0-based)."""
        mat = np.eye(n)
        c, s = math.cos(angle), math.sin(angle)
        mat[axis1, axis1] = c
        mat[axis2, axis2] = c
        mat[axis1, axis2] = -s
        mat[axis2, axis1] = s
        return Rotation(mat)
