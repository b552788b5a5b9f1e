"""Invariant-set enumeration, maximality testing, and separation diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from ..exactalg import int_bareiss_solve, is_zero, submatrix, subvector
from ..moments import EXACT, FLOAT, EnvMomentSet, is_invariant_set, restricted_ls
from .reduction import LisInstance

ENUMERATION_CAP = 24
ZERO_BETA_TOL = 1e-10


def _as_moments(target) -> EnvMomentSet:
    return target.moments if isinstance(target, LisInstance) else target


def _doubled_integer_view(m: EnvMomentSet):
    """(2*Sigma^(2), 2*u^(2)) as int arrays when the instance has the
    fixed-first-environment form Sigma^(1)=I, u^(1)=1 and half-integral
    entries; None otherwise."""
    if m.backend != EXACT or m.n_envs != 2:
        return None
    d = m.d
    s1, u1 = m.sigmas[0], m.us[0]
    for i in range(d):
        if u1[i] != 1:
            return None
        for j in range(d):
            if s1[i][j] != (1 if i == j else 0):
                return None
    s2 = np.empty((d, d), dtype=np.int64)
    u2 = np.empty(d, dtype=np.int64)
    for i in range(d):
        v = 2 * m.us[1][i]
        if not isinstance(v, (int, Fraction)) or v != int(v):
            return None
        u2[i] = int(v)
        for j in range(d):
            w = 2 * m.sigmas[1][i][j]
            if not isinstance(w, (int, Fraction)) or w != int(w):
                return None
            s2[i, j] = int(w)
    return s2, u2


def _scan_fixed_first_env(s2: np.ndarray, u2: np.ndarray, chunk: int = 1 << 18):
    """Exhaustive invariance scan for fixed-first-environment instances.

    With Sigma^(1) = I and u^(1) = 1, beta^(1,S) = 1 on S, so S is invariant
    iff Sigma^(2)_S 1_S = u^(2)_S.  On the doubled (integer) data the row
    sums stay below 2^53, so the batched float matmul is exact.
    """
    d = u2.shape[0]
    s2f = s2.astype(np.float64)
    u2f = u2.astype(np.float64)
    cols = np.arange(d, dtype=np.int64)
    hits: list[tuple[int, ...]] = []
    total = 1 << d
    for start in range(1, total, chunk):
        masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = ((masks[:, None] >> cols) & 1).astype(np.float64)
        rowsums = bits @ s2f
        ok = np.all((bits == 0.0) | (rowsums == u2f), axis=1)
        for mask in masks[ok]:
            mask = int(mask)
            hits.append(tuple(j for j in range(d) if (mask >> j) & 1))
    return hits


@dataclass(frozen=True)
class EnumerationResult:
    """Nonempty invariant sets of an instance.

    ``sets`` follows the invariance definition alone (coefficients agree
    across environments); ``nontrivial`` additionally drops the sets whose
    pooled coefficient vector is zero, which is the existence problem's
    notion of a solution.  The empty set is always invariant and is never
    listed.
    """

    sets: list[tuple[int, ...]]
    nontrivial: list[tuple[int, ...]]
    method: str
    d: int

    @property
    def trivial(self) -> list[tuple[int, ...]]:
        return [s for s in self.sets if s not in set(self.nontrivial)]


def enumerate_invariant_sets(
    target, tol: float = 1e-9, cap: int = ENUMERATION_CAP
) -> EnumerationResult:
    """Exhaustive scan of all nonempty index sets for prediction invariance.

    Exact backends decide invariance by exact equality, float backends by a
    `tol` bound on the maximum coefficient difference.  Instances in the
    fixed-first-environment form take a vectorized integer path; everything
    else goes through per-subset restricted least squares.
    """
    m = _as_moments(target)
    d = m.d
    if d > cap:
        raise ValueError(f"d={d} exceeds the enumeration cap ({cap})")
    fast = _doubled_integer_view(m)
    if fast is not None:
        sets = _scan_fixed_first_env(*fast)
        method = "integer-scan"
    else:
        sets = []
        for size in range(1, d + 1):
            for S in combinations(range(d), size):
                if is_invariant_set(m, S, tol=tol):
                    sets.append(S)
        method = "subset-scan"
    nontrivial = []
    for S in sets:
        pooled = restricted_ls(m, S).pooled
        if m.backend == EXACT:
            if not all(is_zero(pooled[j]) for j in S):
                nontrivial.append(S)
        elif float(np.max(np.abs(np.asarray(pooled, dtype=float)))) > ZERO_BETA_TOL:
            nontrivial.append(S)
    return EnumerationResult(sets=sets, nontrivial=nontrivial, method=method, d=d)


def _pooled_equal(m: EnvMomentSet, a, b, tol: float) -> bool:
    ca = restricted_ls(m, a).pooled
    cb = restricted_ls(m, b).pooled
    if m.backend == EXACT:
        return all(is_zero(ca[j] - cb[j]) for j in range(m.d))
    return bool(np.max(np.abs(ca - cb)) <= tol)


def is_maximum_invariant_set(
    target,
    s_bar,
    tol: float = 1e-9,
    cap: int = ENUMERATION_CAP,
    enumeration: EnumerationResult | None = None,
) -> bool:
    """Test the maximality property behind the identification condition.

    S_bar qualifies iff it is invariant and, for every S, either adding S
    leaves the pooled prediction unchanged or S itself predicts differently
    across environments.  The scan classifies every S: non-invariant sets
    satisfy the heterogeneity arm automatically (some pair of environments
    must disagree), so only the invariant ones need the pooled comparison.
    Pass `enumeration` to reuse an existing scan of the same instance.
    """
    m = _as_moments(target)
    s_bar = tuple(sorted(set(int(j) for j in s_bar)))
    if not is_invariant_set(m, s_bar, tol=tol):
        return False
    inv = enumeration or enumerate_invariant_sets(target, tol=tol, cap=cap)
    for S in inv.sets:
        union = tuple(sorted(set(S) | set(s_bar)))
        if not _pooled_equal(m, union, s_bar, tol):
            return False
    return True


@dataclass(frozen=True)
class SeparationReport:
    """Exact interval checks for the reduction's separation guarantees.

    For every checked S the normalized heterogeneity must be 0 or lie in
    [(10d)^-4, 1]; the normalized distance to every invariant solution must
    lie in [(40d)^-1, 1] (lower bound waived for S = S_dagger).  The
    denominator is the noise-free total response energy sum_e E[Y^(e)^2].
    """

    d: int
    coverage: str
    n_checked: int
    invariant_sets: list[tuple[int, ...]]
    het_violations: list = field(default_factory=list)
    dist_violations: list = field(default_factory=list)
    min_positive_het: Fraction | None = None
    min_solution_distance: Fraction | None = None
    total_energy: Fraction = Fraction(0)
    energy_env1: Fraction = Fraction(0)
    lambda_min: float = 0.0
    lambda_max: float = 0.0
    eigen_ok: bool = False
    energy_ok: bool = False

    @property
    def all_ok(self) -> bool:
        return (
            not self.het_violations
            and not self.dist_violations
            and self.eigen_ok
            and self.energy_ok
        )


def _int_rows(mat: np.ndarray, idx) -> list[list[int]]:
    return [[int(mat[i, j]) for j in idx] for i in idx]


def _int_vec(vec: np.ndarray, idx) -> list[int]:
    return [int(vec[i]) for i in idx]


def separation_diagnostics(
    inst: LisInstance,
    subsets=None,
    chunk_note: str | None = None,
) -> SeparationReport:
    """Exact-rational gap evaluation over subsets of a reduced instance.

    Checks every nonempty S by default (feasible through d around 15 at
    desk scale); pass an explicit `subsets` iterable to restrict coverage,
    which the report then labels "sampled".  Uses the noiseless convention
    Y^(e) = (beta^(e,[d]))' X^(e), under which E[Y^(e)^2] equals
    u^(e)' (Sigma^(e))^-1 u^(e).
    """
    view = _doubled_integer_view(inst.moments)
    if view is None:
        raise ValueError("separation diagnostics require a reduced-form instance")
    s2, u2 = view
    d = inst.d
    # doubled pooled-sum system: B = 2(Sigma1+Sigma2), c = 2(u1+u2), integers
    B = s2 + 2 * np.eye(d, dtype=np.int64)
    c = u2 + 2

    full = list(range(d))
    x_full = int_bareiss_solve(_int_rows(s2, full), _int_vec(u2, full))
    energy_env2 = sum(Fraction(int(u2[j])) * x_full[j] for j in full) / 2
    energy_env1 = Fraction(d)  # u1' Sigma1^-1 u1 with identity first environment
    D = energy_env1 + energy_env2

    ev = np.linalg.eigvalsh(s2.astype(float) / 2.0)
    lam_min, lam_max = float(ev[0]), float(ev[-1])
    eigen_ok = 4 * d <= lam_min and lam_max <= 6 * d
    energy_ok = D <= 10 * d * d

    inv = (
        reduced_invariant_sets(inst)
        if d > ENUMERATION_CAP
        else enumerate_invariant_sets(inst).sets
    )
    # invariant solutions: pooled coefficients beta_dag, plus B @ beta_dag and
    # beta_dag' B beta_dag, so each distance later costs only O(|S|) exact ops
    solutions: list[tuple[tuple[int, ...], list[Fraction], Fraction]] = []
    for S_dag in inv:
        xs = int_bareiss_solve(_int_rows(B, S_dag), _int_vec(c, S_dag))
        beta = [Fraction(0)] * d
        for pos, j in enumerate(S_dag):
            beta[j] = xs[pos]
        w_dag = [
            sum(int(B[i, j]) * beta[j] for j in S_dag) for i in range(d)
        ]
        q_dag = sum(beta[j] * w_dag[j] for j in S_dag)
        solutions.append((S_dag, w_dag, q_dag))

    if subsets is None:
        coverage = "full"
        iterator = (
            S for size in range(1, d + 1) for S in combinations(range(d), size)
        )
    else:
        coverage = chunk_note or "sampled"
        iterator = (tuple(sorted(set(S))) for S in subsets)

    het_lo = Fraction(1, (10 * d) ** 4)
    dist_lo = Fraction(1, 40 * d)
    het_viol, dist_viol = [], []
    min_pos_het = None
    min_sol_dist = None
    n_checked = 0
    for S in iterator:
        if not S:
            continue
        n_checked += 1
        Sl = list(S)
        x2 = int_bareiss_solve(_int_rows(s2, Sl), _int_vec(u2, Sl))
        qf2 = sum(Fraction(int(u2[j])) * x for j, x in zip(Sl, x2)) / 2
        xp = int_bareiss_solve(_int_rows(B, Sl), _int_vec(c, Sl))
        qfp = sum(Fraction(int(c[j])) * x for j, x in zip(Sl, xp)) / 2
        het_num = len(Sl) + qf2 - qfp  # sum_e ||beta^(S)-beta^(e,S)||^2_(Sigma^(e))
        h = het_num / D
        if h != 0 and not (het_lo <= h <= 1):
            het_viol.append((S, h))
        if h > 0 and (min_pos_het is None or h < min_pos_het):
            min_pos_het = h
        quad_s = 2 * qfp  # beta^(S)' B beta^(S), since B_S beta_S = c_S
        for S_dag, w_dag, q_dag in solutions:
            # ||beta^(S) - beta^(S_dag)||^2 under B expands around the
            # precomputed solution terms; pooled mean matrix is B/4
            cross = sum(x * w_dag[j] for j, x in zip(Sl, xp))
            g = ((quad_s - 2 * cross + q_dag) / 4) / D
            lo = Fraction(0) if S == S_dag else dist_lo
            if not (lo <= g <= 1):
                dist_viol.append((S, S_dag, g))
            if S != S_dag and (min_sol_dist is None or g < min_sol_dist):
                min_sol_dist = g
    return SeparationReport(
        d=d,
        coverage=coverage,
        n_checked=n_checked,
        invariant_sets=list(inv),
        het_violations=het_viol,
        dist_violations=dist_viol,
        min_positive_het=min_pos_het,
        min_solution_distance=min_sol_dist,
        total_energy=D,
        energy_env1=energy_env1,
        lambda_min=lam_min,
        lambda_max=lam_max,
        eigen_ok=eigen_ok,
        energy_ok=energy_ok,
    )
