"""Compiling 3-CNF formulas into invariant-set existence instances.

Each clause contributes a block of seven coordinates, one per way of
assigning truth values to its three literals (action IDs 1..7, the 3-bit
pattern over the literals, most significant bit first; 0 would leave the
clause unsatisfied).  A contradiction matrix marks incompatible actions,
and the second environment's moments are built so that a set of
coordinates is prediction-invariant exactly when it picks one mutually
compatible action per clause plus the last coordinate.  The map is
parsimonious: solution counts are preserved.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..moments import EXACT, EnvMomentSet
from .sat import CnfFormula


def action_bits(t: int) -> tuple[int, int, int]:
    """3-bit pattern of action ID t, most significant bit = first literal."""
    if not 1 <= t <= 7:
        raise ValueError(f"action ID {t} outside [1, 7]")
    return ((t >> 2) & 1, (t >> 1) & 1, t & 1)


def action_assignment(clause, t: int) -> list[tuple[int, bool]]:
    """Variable assignments induced by action t on a clause, literal-wise.

    Literal v receiving truth value b assigns the variable b; literal -v
    assigns it (not b).  Duplicated variables inside a clause produce one
    entry per literal, so self-contradictions stay visible.
    """
    bits = action_bits(t)
    out = []
    for l, b in zip(clause, bits):
        out.append((abs(l), bool(b) if l > 0 else not bool(b)))
    return out


def self_contradicts(clause, t: int) -> bool:
    seen: dict[int, bool] = {}
    for v, val in action_assignment(clause, t):
        if seen.setdefault(v, val) != val:
            return True
    return False


def contradicts(clause_a, t_a: int, clause_b, t_b: int) -> bool:
    """Whether two actions assign some shared variable opposite values."""
    a = action_assignment(clause_a, t_a)
    b = action_assignment(clause_b, t_b)
    return any(va == vb and xa != xb for va, xa in a for vb, xb in b)


@dataclass(frozen=True)
class ContradictionMatrix:
    """Symmetric 0/1 matrix over the 7k action coordinates."""

    A: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=np.int64)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] % 7:
            raise ValueError("contradiction matrix must be square with side 7k")
        if not np.array_equal(A, A.T):
            raise ValueError("contradiction matrix must be symmetric")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def n_clauses(self) -> int:
        return self.A.shape[0] // 7


def contradiction_matrix(f: CnfFormula) -> ContradictionMatrix:
    k = f.n_clauses
    A = np.zeros((7 * k, 7 * k), dtype=np.int64)
    for i in range(k):
        for t in range(1, 8):
            r = 7 * i + t - 1
            A[r, r] = 1 if self_contradicts(f.clauses[i], t) else 0
            for tp in range(t + 1, 8):
                A[r, 7 * i + tp - 1] = A[7 * i + tp - 1, r] = 1
        for ip in range(i + 1, k):
            for t in range(1, 8):
                for tp in range(1, 8):
                    if contradicts(f.clauses[i], t, f.clauses[ip], tp):
                        A[7 * i + t - 1, 7 * ip + tp - 1] = 1
                        A[7 * ip + tp - 1, 7 * i + t - 1] = 1
    return ContradictionMatrix(A)


@dataclass(frozen=True)
class LisInstance:
    """An invariant-set existence instance with exact-rational moments.

    ``provenance`` is either "hand-built" or "reduced-from-cnf(k=...)"; for
    reduced instances ``cnf`` and ``A`` are kept, the first environment is
    (I_d, 1_d), and all entries are integers or halves (``sigma2_x2`` /
    ``u2_x2`` hold the doubled second environment as int64 arrays).
    """

    d: int
    moments: EnvMomentSet
    provenance: str = "hand-built"
    cnf: CnfFormula | None = None
    A: ContradictionMatrix | None = None
    sigma2_x2: np.ndarray | None = None
    u2_x2: np.ndarray | None = None

    @property
    def reduced(self) -> bool:
        return self.cnf is not None

    @classmethod
    def hand_built(cls, moments: EnvMomentSet) -> "LisInstance":
        if moments.backend != EXACT:
            raise ValueError("lab instances use the exact backend")
        return cls(d=moments.d, moments=moments)


def reduce_3sat(f: CnfFormula) -> LisInstance:
    """Parsimonious compilation of a width-3 CNF into a two-environment instance.

    d = 7k+1; the first environment is (I_d, 1_d); the second environment is
        Sigma = [[5d I + A, 1/2], [1/2, 5d]],  u = ((5d + 1/2) 1, 5d + k/2),
    assembled exactly over the rationals.
    """
    k = f.n_clauses
    d = 7 * k + 1
    A = contradiction_matrix(f)
    # doubled second environment, all integers
    s2 = np.zeros((d, d), dtype=np.int64)
    s2[: 7 * k, : 7 * k] = 2 * (5 * d * np.eye(7 * k, dtype=np.int64) + A.A)
    s2[: 7 * k, d - 1] = 1
    s2[d - 1, : 7 * k] = 1
    s2[d - 1, d - 1] = 10 * d
    u2 = np.concatenate([np.full(7 * k, 10 * d + 1, dtype=np.int64), [10 * d + k]])
    half = Fraction(1, 2)
    sigma1 = [[Fraction(int(i == j)) for j in range(d)] for i in range(d)]
    u1 = [Fraction(1)] * d
    sigma2 = [[int(s2[i, j]) * half for j in range(d)] for i in range(d)]
    u2_frac = [int(v) * half for v in u2]
    moments = EnvMomentSet.from_moments(
        [sigma1, sigma2], [u1, u2_frac], backend=EXACT, pd_flags=[True, True]
    )
    return LisInstance(
        d=d,
        moments=moments,
        provenance=f"reduced-from-cnf(k={k})",
        cnf=f,
        A=A,
        sigma2_x2=s2,
        u2_x2=u2,
    )


@dataclass(frozen=True)
class DecodeResult:
    ok: bool
    assignment: tuple[bool, ...] | None = None
    reason: str = ""


def decode_solution(S, f: CnfFormula) -> DecodeResult:
    """Reconstruct a satisfying assignment from an invariant set (0-based S).

    Requires the last coordinate d-1 in S, |S| = k+1, and exactly one action
    coordinate in each clause block; the induced variable assignments must
    be mutually consistent and satisfy f.  Failures are returned, not
    raised, with the condition that broke.
    """
    k = f.n_clauses
    d = 7 * k + 1
    S = sorted(set(int(j) for j in S))
    if S and (S[0] < 0 or S[-1] >= d):
        return DecodeResult(False, reason=f"coordinate out of range [0, {d - 1}]")
    if d - 1 not in S:
        return DecodeResult(False, reason="last coordinate absent")
    if len(S) != k + 1:
        return DecodeResult(False, reason=f"expected k+1={k + 1} coordinates, got {len(S)}")
    actions: dict[int, int] = {}
    for j in S[:-1]:
        i, t = divmod(j, 7)
        t += 1
        if i in actions:
            return DecodeResult(False, reason=f"two action coordinates in clause block {i}")
        actions[i] = t
    if len(actions) != k:
        return DecodeResult(False, reason="some clause block has no action coordinate")
    assignment: dict[int, bool] = {}
    for i in range(k):
        for v, val in action_assignment(f.clauses[i], actions[i]):
            if assignment.setdefault(v, val) != val:
                return DecodeResult(
                    False, reason=f"conflicting assignments for variable {v}"
                )
    full = tuple(assignment.get(v, False) for v in range(1, f.n_vars + 1))
    if not f.evaluate(full):
        return DecodeResult(False, reason="decoded assignment does not satisfy the formula")
    return DecodeResult(True, assignment=full)


def encode_action_profile(assignment, f: CnfFormula) -> tuple[int, ...]:
    """Map a satisfying assignment to its invariant set (0-based, sorted).

    Inverse of `decode_solution` on valid inputs; raises ValueError when the
    assignment does not satisfy f.
    """
    if len(assignment) != f.n_vars:
        raise ValueError("assignment length must equal n_vars")
    if not f.evaluate(assignment):
        raise ValueError("assignment does not satisfy the formula")
    k = f.n_clauses
    d = 7 * k + 1
    coords = []
    for i, clause in enumerate(f.clauses):
        bits = [
            (assignment[abs(l) - 1] if l > 0 else not assignment[abs(l) - 1])
            for l in clause
        ]
        t = 4 * bits[0] + 2 * bits[1] + bits[2]
        coords.append(7 * i + t - 1)
    coords.append(d - 1)
    return tuple(coords)


def reduced_invariant_sets(inst: LisInstance) -> list[tuple[int, ...]]:
    """Complete invariant-set search specialized to reduced instances.

    Scales past the exhaustive-scan cap by exploiting two integer facts of
    the instance data (not the formula): with Sigma^(1) = I and u^(1) = 1
    every candidate must satisfy Sigma^(2)_S 1_S = u^(2)_S, whose j-th row
    reads 5d + (A 1_S)_j + (1/2) 1{d in S} = 5d + 1/2 over the action
    coordinates, forcing d in S and (A 1_S)_j = 0, and whose last row forces
    |S| = k + 1 with one coordinate per clause block.  The remaining search
    over per-block actions is a DFS with conflict pruning against A.
    Cross-checked against the plain exhaustive scan on small instances.
    """
    if not inst.reduced:
        raise ValueError("structured search applies to reduced instances only")
    A = inst.A.A
    k = inst.cnf.n_clauses
    d = inst.d
    out: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def compatible(j: int) -> bool:
        return A[j, j] == 0 and all(A[j, jp] == 0 for jp in chosen)

    def dfs(block: int) -> None:
        if block == k:
            out.append(tuple(chosen) + (d - 1,))
            return
        for t in range(7):
            j = 7 * block + t
            if compatible(j):
                chosen.append(j)
                dfs(block + 1)
                chosen.pop()

    dfs(0)
    return out
