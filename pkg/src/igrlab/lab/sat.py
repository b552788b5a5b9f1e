"""3-CNF formulas: DIMACS parsing, brute-force counting, parity gadget."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_CAP = 24


@dataclass(frozen=True)
class CnfFormula:
    """A width-3 CNF over variables 1..n_vars.

    Clauses are triples of signed variable indices; a literal may repeat
    inside a clause.  Every declared variable must occur somewhere (an
    unused variable would silently double the model count).
    """

    n_vars: int
    clauses: tuple[tuple[int, int, int], ...]

    def __post_init__(self):
        clauses = tuple(tuple(int(l) for l in c) for c in self.clauses)
        object.__setattr__(self, "clauses", clauses)
        if self.n_vars < 1 or not clauses:
            raise ValueError("formula needs at least one variable and one clause")
        used = set()
        for c in clauses:
            if len(c) != 3:
                raise ValueError(f"clause {c} does not have width 3")
            for l in c:
                if l == 0 or abs(l) > self.n_vars:
                    raise ValueError(f"literal {l} out of range [1, {self.n_vars}]")
                used.add(abs(l))
        missing = set(range(1, self.n_vars + 1)) - used
        if missing:
            raise ValueError(f"variables never used in any clause: {sorted(missing)}")

    @property
    def n_clauses(self) -> int:
        return len(self.clauses)

    def evaluate(self, assignment) -> bool:
        """Evaluate under a boolean assignment (index 0 -> variable 1)."""
        return all(
            any((assignment[abs(l) - 1] if l > 0 else not assignment[abs(l) - 1]) for l in c)
            for c in self.clauses
        )


def parse_dimacs(text: str) -> CnfFormula:
    """Parse DIMACS CNF text into a width-3 formula.

    Comment lines start with 'c'; the header is ``p cnf <n_vars> <n_clauses>``;
    clauses are 0-terminated literal runs.  Clauses whose width is not
    exactly 3 are rejected (no implicit padding).
    """
    header = None
    tokens: list[int] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("c"):
            continue
        if line.startswith("p"):
            if header is not None:
                raise ValueError(f"line {lineno}: duplicate header")
            parts = line.split()
            if len(parts) != 4 or parts[0] != "p" or parts[1] != "cnf":
                raise ValueError(f"line {lineno}: malformed header {line!r}")
            try:
                header = (int(parts[2]), int(parts[3]))
            except ValueError:
                raise ValueError(f"line {lineno}: malformed header {line!r}") from None
            continue
        if line == "%":  # some generators end files this way
            break
        if header is None:
            raise ValueError(f"line {lineno}: clause before header")
        try:
            tokens.extend(int(t) for t in line.split())
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer token") from None
    if header is None:
        raise ValueError("missing DIMACS header")
    n_vars, n_clauses = header
    clauses, current = [], []
    for t in tokens:
        if t == 0:
            if len(current) != 3:
                raise ValueError(f"clause {tuple(current)} does not have width 3")
            clauses.append(tuple(current))
            current = []
        else:
            current.append(t)
    if current:
        raise ValueError("unterminated clause at end of input")
    if len(clauses) != n_clauses:
        raise ValueError(f"header declares {n_clauses} clauses, found {len(clauses)}")
    return CnfFormula(n_vars, tuple(clauses))


def to_dimacs(f: CnfFormula) -> str:
    lines = [f"p cnf {f.n_vars} {f.n_clauses}"]
    lines += [" ".join(str(l) for l in c) + " 0" for c in f.clauses]
    return "\n".join(lines) + "\n"


def sat_brute_force(
    f: CnfFormula, return_assignments: bool = True, cap: int = BRUTE_FORCE_CAP
) -> tuple[int, list[tuple[bool, ...]]]:
    """Exhaustive truth-table scan; returns (count, satisfying assignments).

    Assignment bit j (variable j+1) of mask m is (m >> j) & 1.
    """
    n = f.n_vars
    if n > cap:
        raise ValueError(f"{n} variables exceeds the brute-force cap ({cap})")
    masks = np.arange(1 << n, dtype=np.int64)
    sat = np.ones(1 << n, dtype=bool)
    for c in f.clauses:
        clause_sat = np.zeros(1 << n, dtype=bool)
        for l in c:
            bit = ((masks >> (abs(l) - 1)) & 1).astype(bool)
            clause_sat |= bit if l > 0 else ~bit
        sat &= clause_sat
    count = int(sat.sum())
    assignments: list[tuple[bool, ...]] = []
    if return_assignments:
        for m in np.nonzero(sat)[0]:
            m = int(m)
            assignments.append(tuple(bool((m >> j) & 1) for j in range(n)))
    return count, assignments


# x1 XOR x2 = x3, as four width-3 clauses
_XOR_CLAUSES = ((-1, -2, -3), (1, -2, 3), (-1, 2, 3), (1, 2, -3))


def xor_parity_gadget(mask, aux_offset: int) -> tuple[list[tuple[int, int, int]], int]:
    """Clauses forcing even parity of the masked variables, over GF(2).

    `mask` is a 0/1 sequence over the original variables; auxiliary chain
    variables are numbered aux_offset+1, ...  Returns (clauses, n_aux).
    A single masked variable degenerates to forcing it False.
    """
    sel = [i + 1 for i, b in enumerate(mask) if b]
    if not sel:
        raise ValueError("parity mask must select at least one variable")
    if len(sel) == 1:
        v = sel[0]
        return [(-v, -v, -v)], 0
    clauses: list[tuple[int, int, int]] = []
    n_aux = len(sel) - 1
    prev = sel[0]
    for r in range(1, len(sel)):
        t = aux_offset + r  # t = prev XOR sel[r]
        sub = {1: prev, 2: sel[r], 3: t}
        for c in _XOR_CLAUSES:
            clauses.append(tuple((1 if l > 0 else -1) * sub[abs(l)] for l in c))
        prev = t
    clauses.append((-prev, -prev, -prev))
    return clauses, n_aux


def with_parity_constraint(f: CnfFormula, mask) -> tuple[CnfFormula, int]:
    """Conjoin f with the parity gadget on `mask`; returns (formula, n_aux).

    Solutions of the result project bijectively onto the solutions of f
    with even parity on the masked variables.
    """
    if len(mask) != f.n_vars:
        raise ValueError("mask length must equal n_vars")
    gadget, n_aux = xor_parity_gadget(mask, aux_offset=f.n_vars)
    return CnfFormula(f.n_vars + n_aux, f.clauses + tuple(gadget)), n_aux


def random_3cnf(k: int, n_vars: int, rng: np.random.Generator) -> CnfFormula:
    """Random width-3 formula in which every variable occurs at least once.

    Variables may repeat inside a clause, matching what the reduction's
    contradiction logic has to handle.
    """
    if not 1 <= n_vars <= 3 * k:
        raise ValueError("need 1 <= n_vars <= 3k so each variable can occur")
    while True:
        clauses = []
        for _ in range(k):
            vs = rng.integers(1, n_vars + 1, size=3)
            signs = rng.choice([-1, 1], size=3)
            clauses.append(tuple(int(s * v) for s, v in zip(signs, vs)))
        if len({abs(l) for c in clauses for l in c}) == n_vars:
            return CnfFormula(n_vars, tuple(clauses))
