"""Complexity lab: invariant-set search, its 3-CNF reduction, and diagnostics."""

from .sat import (
    CnfFormula,
    parse_dimacs,
    random_3cnf,
    sat_brute_force,
    to_dimacs,
    with_parity_constraint,
    xor_parity_gadget,
)
from .reduction import (
    ContradictionMatrix,
    DecodeResult,
    LisInstance,
    contradiction_matrix,
    decode_solution,
    encode_action_profile,
    reduce_3sat,
    reduced_invariant_sets,
)
from .invariance import (
    EnumerationResult,
    SeparationReport,
    enumerate_invariant_sets,
    is_maximum_invariant_set,
    separation_diagnostics,
)

__all__ = [
    "CnfFormula",
    "ContradictionMatrix",
    "DecodeResult",
    "EnumerationResult",
    "LisInstance",
    "SeparationReport",
    "contradiction_matrix",
    "decode_solution",
    "encode_action_profile",
    "enumerate_invariant_sets",
    "is_maximum_invariant_set",
    "parse_dimacs",
    "random_3cnf",
    "reduce_3sat",
    "reduced_invariant_sets",
    "sat_brute_force",
    "separation_diagnostics",
    "to_dimacs",
    "with_parity_constraint",
    "xor_parity_gadget",
]
