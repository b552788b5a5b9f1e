"""Prediction variation v(S) and per-variable invariance weights w_k(j).

v(S) measures how much the best linear predictor restricted to S moves
across environments; w_k(j) is the smallest v(S) over sets of size at most
k containing j.  A zero weight certifies that variable j admits an
invariant explanation within the search budget k, so the penalized solver
leaves it unpenalized.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations

import numpy as np

from .exactalg import SingularMatrixError
from .moments import FLOAT, EnvMomentSet, _check_set, restricted_ls, solve_float

SQUARED = "squared"
SQRT = "sqrt"


def prediction_variation(m: EnvMomentSet, S):
    """v(S) = (1/|E|) sum_e ||beta^(e,S)_S - beta^(S)_S||^2_{Sigma^(e)_S}.

    Returned on the squared scale (no square root applied); exact backends
    return an exact scalar.  S = () gives 0.
    """
    S = _check_set(S, m.d)
    if not S or m.n_envs == 1:
        return 0.0
    coef = restricted_ls(m, S)
    if m.backend != FLOAT:
        total = 0
        for e in range(m.n_envs):
            diff = [coef.per_env[e][j] - coef.pooled[j] for j in S]
            sig = m.sigmas[e]
            total += sum(
                diff[a] * sig[S[a]][S[b]] * diff[b] for a in range(len(S)) for b in range(len(S))
            )
        if isinstance(total, int):
            return Fraction(total, m.n_envs)
        return total / m.n_envs
    idx = np.asarray(S)
    total = 0.0
    for e in range(m.n_envs):
        diff = (coef.per_env[e] - coef.pooled)[idx]
        total += float(diff @ m.sigmas[e][np.ix_(idx, idx)] @ diff)
    return total / m.n_envs


def prediction_variation_residual(m: EnvMomentSet, S) -> float:
    """v(S) through the residual-moment route.

    Uses the pooled-restricted residual U^(e,S) = X_S (Y - beta^(S)'X):
    v(S) = (1/|E|) sum_e || (Sigma^(e)_S)^(-1/2) E[U^(e,S)] ||^2, evaluated
    as r' (Sigma^(e)_S)^(-1) r with r = u^(e)_S - Sigma^(e)_S beta^(S)_S.
    Agrees with `prediction_variation` up to roundoff; the two forms act as
    mutual cross-checks.
    """
    S = _check_set(S, m.d)
    if not S or m.n_envs == 1:
        return 0.0
    if m.backend != FLOAT:
        m = m.to_float()
    idx = np.asarray(S)
    pooled = restricted_ls(m, S).pooled[idx]
    total = 0.0
    for e in range(m.n_envs):
        sig = m.sigmas[e][np.ix_(idx, idx)]
        r = m.us[e][idx] - sig @ pooled
        total += float(r @ solve_float(sig, r, label=f"environment {m.env_ids[e]}"))
    return total / m.n_envs


@dataclass(frozen=True)
class VariationCache:
    """Map from index set S (as a sorted tuple) to v(S), shared across j."""

    values: dict[tuple[int, ...], float] = field(default_factory=dict)
    skipped: list[tuple[int, ...]] = field(default_factory=list)


@dataclass(frozen=True)
class WeightTable:
    """Per-variable invariance weights at budget k.

    `values` follow `convention`: "squared" stores v itself, "sqrt" stores
    sqrt(v).  The penalty consumer always works on the sqrt scale (see
    `penalty_weights`).  `argmin_sets[j]` is the first minimizer of v over
    sets containing j in lexicographic order.
    """

    k: int
    values: np.ndarray
    argmin_sets: list[tuple[int, ...]]
    convention: str = SQUARED
    cache: VariationCache | None = None
    undefined: tuple[int, ...] = ()

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.convention not in (SQUARED, SQRT):
            raise ValueError(f"unknown weight convention {self.convention!r}")

    @property
    def d(self) -> int:
        return self.values.shape[0]

    def penalty_weights(self) -> np.ndarray:
        """Weights on the scale multiplying |beta_j| in the objective."""
        if self.convention == SQRT:
            return self.values
        return np.sqrt(np.maximum(self.values, 0.0))


def variation_cache(m: EnvMomentSet, k: int, tol_negative: float = 1e-14) -> VariationCache:
    """Evaluate v(S) for every nonempty S with |S| <= k, in lexicographic order."""
    d = m.d
    values: dict[tuple[int, ...], float] = {}
    skipped: list[tuple[int, ...]] = []
    for size in range(1, k + 1):
        for S in combinations(range(d), size):
            try:
                v = prediction_variation(m, S)
            except SingularMatrixError:
                skipped.append(S)
                continue
            v = float(v)
            if v < 0:
                # quadratic form; tiny negatives are roundoff
                if v < -tol_negative * max(1.0, abs(v)):
                    warnings.warn(f"negative variation {v} for S={S}; clamping to 0")
                v = 0.0
            values[S] = v
    return VariationCache(values, skipped)


def weight_table(m: EnvMomentSet, k: int, convention: str = SQUARED) -> WeightTable:
    """w_k(j) = min over S with j in S, |S| <= k of v(S), for every j.

    Subsets are enumerated in lexicographic order and the first minimizer is
    kept.  Singular subsets are skipped (treated as +inf) with a warning; a
    variable whose every subset is singular ends up in `undefined`.
    """
    d = m.d
    if not 1 <= k <= d:
        raise ValueError(f"budget k={k} must be in [1, {d}]")
    cache = variation_cache(m, k)
    if cache.skipped:
        warnings.warn(
            f"{len(cache.skipped)} singular subsets skipped during weight search"
        )
    best = np.full(d, np.inf)
    argmin: list[tuple[int, ...] | None] = [None] * d
    for S, v in cache.values.items():  # insertion order is lexicographic by size
        for j in S:
            if v < best[j]:
                best[j] = v
                argmin[j] = S
    undefined = tuple(j for j in range(d) if argmin[j] is None)
    values = best.copy()
    if convention == SQRT:
        values[np.isfinite(values)] = np.sqrt(values[np.isfinite(values)])
    return WeightTable(
        k=k,
        values=values,
        argmin_sets=[s if s is not None else () for s in argmin],
        convention=convention,
        cache=cache,
        undefined=undefined,
    )


def gamma_star(oracle, weights: WeightTable) -> float:
    """Smallest penalty level at which the population solution is the causal one.

    gamma*_k = max over endogenously spurious j of
    |pooled E[X_j eps]| / w_k(j), with w on the penalty (sqrt) scale.
    Returns 0 when there are no endogenously spurious variables and +inf
    when one of them has weight 0 (identification failure at this budget).
    """
    G = list(oracle.endogenous)
    if not G:
        return 0.0
    w = weights.penalty_weights()
    pooled_eps = np.mean(np.asarray(oracle.x_eps_cov, dtype=float), axis=0)
    worst = 0.0
    for j in G:
        if w[j] <= 0.0:
            return float("inf")
        worst = max(worst, abs(pooled_eps[j]) / w[j])
    return float(worst)
