"""Command-line front door.

Verbs: compute, check, basis, rank, decompose, delta.  Files use the JSON
formats of the library (polytope: {"dim", "vertices"}; patch: {"patches":
[{"position", "normal"}]}; tensor: {"n", "rank", "coeffs"}).  Identical
argv and seed produce byte-identical outputs.

Exit codes: 0 success / all checks pass, 1 check failure, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .analysis import (
    SampleSpec,
    ValuationOracle,
    axiom_report,
    decompose_on_basis,
    extract_delta,
    independence_rank,
)
from .integrate import SphericalRegion
from .polytopes import GeometryError, SupportPatch, build_polytope
from .symtensor import Subspace, SymTensor, TensorError
from .valuations import BasisDescriptor, enumerate_basis

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2


class InputError(Exception):
    pass


def _default_seed(value):
    if value is not None:
        return int(value)
    env = os.environ.get("MTL_SEED")
    return int(env) if env else 7


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_polytope(path):
    rec = _load_json(path)
    if "vertices" not in rec:
        raise InputError(f"{path}: missing 'vertices'")
    return build_polytope(np.asarray(rec["vertices"], dtype=float))


def _load_patch(path):
    if path is None:
        return SupportPatch.everything()
    rec = _load_json(path)
    try:
        return SupportPatch.from_dict(rec)
    except (KeyError, GeometryError) as exc:
        raise InputError(f"{path}: bad patch file: {exc}") from exc


def _emit(payload, out_path):
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _parse_indices(body, count_required):
    parts = [p for p in body.split(",") if p != ""]
    if len(parts) not in count_required:
        raise InputError(f"expected {count_required} indices, got {len(parts)} in {body!r}")
    return [int(p) for p in parts]


def _descriptor_from_spec(kind, body, n):
    if kind == "phi":
        vals = _parse_indices(body, (4, 5))
        k, r, s, j = vals[:4]
        m = vals[4] if len(vals) == 5 else 0
        return BasisDescriptor("phi", n, m, r, s, k=k, j=j).validate()
    if kind == "tilde3":
        vals = _parse_indices(body, (3, 4))
        r, s, j = vals[:3]
        m = vals[3] if len(vals) == 4 else 0
        return BasisDescriptor("tilde3", n, m, r, s, j=j).validate()
    if kind == "tilde2":
        vals = _parse_indices(body, (3, 4))
        k, r, s = vals[:3]
        m = vals[3] if len(vals) == 4 else 0
        return BasisDescriptor("tilde2", n, m, r, s, k=k).validate()
    raise InputError(f"unknown builtin kind {kind!r}")


def parse_oracle(spec, n):
    """builtin:<kind>:<indices> with indices k,r,s,j[,m] (phi), r,s,j[,m]
    (tilde3) or k,r,s[,m] (tilde2); or combo:<coef>*<kind>:<indices>+... """
    try:
        if spec.startswith("builtin:"):
            _, kind, body = spec.split(":", 2)
            return ValuationOracle.from_descriptor(_descriptor_from_spec(kind, body, n))
        if spec.startswith("combo:"):
            terms = []
            for chunk in spec[len("combo:"):].split("+"):
                coef_str, rest = chunk.split("*", 1)
                kind, body = rest.split(":", 1)
                terms.append((float(coef_str), _descriptor_from_spec(kind, body, n)))
            return ValuationOracle.from_combo(terms, n)
    except (ValueError, InputError) as exc:
        raise InputError(f"bad oracle spec {spec!r}: {exc}") from exc
    raise InputError(f"oracle spec must start with builtin: or combo: ({spec!r})")


def _cmd_compute(args):
    poly = _load_polytope(args.polytope)
    patch = _load_patch(args.patch)
    n = poly.ambient_dim
    if args.valuation == "phi":
        d = BasisDescriptor("phi", n, args.m, args.r, args.s, k=args.k, j=args.j)
    elif args.valuation == "tilde3":
        d = BasisDescriptor("tilde3", n, args.m, args.r, args.s, j=args.j)
    elif args.valuation == "tilde2":
        d = BasisDescriptor("tilde2", n, args.m, args.r, args.s, k=args.k)
    else:
        raise InputError(f"unknown valuation {args.valuation!r}")
    from .valuations import evaluate_basis_element

    try:
        value = evaluate_basis_element(d.validate(), poly, patch)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(value.to_dict(), args.out)
    return EXIT_OK


def _cmd_check(args):
    seed = _default_seed(args.seed)
    oracle = parse_oracle(args.oracle, args.n)
    report = axiom_report(oracle, seed=seed, trials=args.trials, tolerance=args.tolerance)
    _emit(report.to_dict(), args.out)
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def _cmd_basis(args):
    for d in enumerate_basis(args.n, args.p):
        sys.stdout.write(json.dumps(d.to_dict(), sort_keys=True) + "\n")
    return EXIT_OK


def _cmd_rank(args):
    seed = _default_seed(args.seed)
    rank, expected, sv = independence_rank(args.n, args.p, seed=seed)
    ok = rank == expected
    gap = sv[expected - 1] / sv[expected] if expected < len(sv) and sv[expected] > 0 else float("inf")
    sys.stdout.write(
        f"rank={rank} expected={expected} gap={gap:.3e} {'PASS' if ok else 'FAIL'}\n"
    )
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_decompose(args):
    seed = _default_seed(args.seed)
    oracle = parse_oracle(args.oracle, args.n)
    spec = SampleSpec(args.n, oracle.p, seed=seed)
    result = decompose_on_basis(oracle, spec, tol=args.tolerance)
    payload = result.to_dict()
    payload["oracle"] = oracle.name
    _emit(payload, args.out)
    return EXIT_OK if result.residual <= args.tolerance else EXIT_CHECK_FAILED


def _cmd_delta(args):
    oracle = parse_oracle(args.oracle, args.n)
    if not 0 <= args.k <= args.n - 1:
        raise InputError("k must lie in 0..n-1")
    base = np.eye(args.n)
    L = Subspace(args.n, base[: args.k]) if args.k else Subspace.zero(args.n)
    carrier = L.orthogonal_complement()
    normals = []
    if args.b_normals:
        for chunk in args.b_normals.split(";"):
            normals.append([float(x) for x in chunk.split(",")])
    region = SphericalRegion(carrier, ambient_constraints=normals)
    try:
        value = extract_delta(oracle, L, region)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    _emit(value.to_dict(), args.out)
    return EXIT_OK


def make_parser():
    p = argparse.ArgumentParser(
        prog="minktens",
        description="Minkowski tensors and rotation-covariant local tensor "
        "valuations on convex polytopes",
    )
    sub = p.add_subparsers(dest="verb", required=True)

    c = sub.add_parser("compute", help="evaluate a valuation on a polytope and patch")
    c.add_argument("--polytope", required=True)
    c.add_argument("--patch")
    c.add_argument("--valuation", required=True, choices=["phi", "tilde3", "tilde2"])
    c.add_argument("--k", type=int, default=0)
    c.add_argument("--r", type=int, default=0)
    c.add_argument("--s", type=int, default=0)
    c.add_argument("--j", type=int, default=0)
    c.add_argument("--m", type=int, default=0)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_compute)

    c = sub.add_parser("check", help="run the axiom suite against an oracle")
    c.add_argument("--oracle", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--seed", type=int)
    c.add_argument("--trials", type=int, default=20)
    c.add_argument("--tolerance", type=float, default=1e-7)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_check)

    c = sub.add_parser("basis", help="enumerate the basis descriptors for (n, p)")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--p", type=int, required=True)
    c.set_defaults(func=_cmd_basis)

    c = sub.add_parser("rank", help="certify linear independence numerically")
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--p", type=int, required=True)
    c.add_argument("--seed", type=int)
    c.set_defaults(func=_cmd_rank)

    c = sub.add_parser("decompose", help="express an oracle in the basis")
    c.add_argument("--oracle", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--seed", type=int)
    c.add_argument("--tolerance", type=float, default=1e-6)
    c.add_argument("--out")
    c.set_defaults(func=_cmd_decompose)

    c = sub.add_parser("delta", help="extract the flat density of an oracle")
    c.add_argument("--oracle", required=True)
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--k", type=int, required=True)
    c.add_argument(
        "--b-normals",
        help="inward halfspace normals of the region B, e.g. '0,1,0;0,0,1'",
    )
    c.add_argument("--out")
    c.set_defaults(func=_cmd_delta)
    return p


def main(argv=None):
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT_ERROR
    except (GeometryError, TensorError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
