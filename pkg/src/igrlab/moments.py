"""Second-moment data model: per-environment and pooled (Sigma, u).

Everything downstream (weights, the penalized solver, the invariance lab)
consumes `EnvMomentSet` rather than raw samples.  Two backends coexist:
float64 for estimation from data, exact scalars (Fraction / sympy) for
lab instances whose invariance checks are equality tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dataset import MultiEnvDataset
from .exactalg import SingularMatrixError, exact_solve, is_zero, submatrix, subvector

FLOAT = "float64"
EXACT = "exact"

# Relative pivot threshold for declaring a float submatrix singular.
PIVOT_RTOL = 1e-12


def solve_float(mat: np.ndarray, rhs: np.ndarray, label: str = "") -> np.ndarray:
    """Gaussian elimination with partial pivoting and explicit singularity check."""
    a = np.array(mat, dtype=float)
    b = np.array(rhs, dtype=float)
    m = a.shape[0]
    if m == 0:
        return b[:0]
    threshold = PIVOT_RTOL * max(np.max(np.abs(a)), 1e-300)
    perm = np.arange(m)
    for col in range(m):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if abs(a[piv, col]) <= threshold:
            raise SingularMatrixError(
                f"singular submatrix{' in ' + label if label else ''}", environment=label or None
            )
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
            perm[[col, piv]] = perm[[piv, col]]
        factors = a[col + 1 :, col] / a[col, col]
        a[col + 1 :, col:] -= np.outer(factors, a[col, col:])
        b[col + 1 :] -= factors * b[col]
    x = np.empty(m)
    for r in range(m - 1, -1, -1):
        x[r] = (b[r] - a[r, r + 1 :] @ x[r + 1 :]) / a[r, r]
    return x


@dataclass(frozen=True)
class EnvMomentSet:
    """Per-environment and pooled second moments.

    Fields
    ------
    sigmas, us : per-environment E[X X'] and E[X Y]
    pooled_sigma, pooled_u : equal-weight (1/|E|) averages
    backend : "float64" or "exact"
    n_samples : per-environment sample counts, 0 for population moments
    mean_sq_y : pooled E[Y^2] when known (risks are then absolute)
    pd_flags : recorded per-environment positive-definiteness (not assumed)
    scaling : column rescale factors applied when normalize=True, for
        mapping coefficients back to the original x-scale
    env_means : per-environment (x_mean, y_mean) recorded when centering
    """

    sigmas: list
    us: list
    pooled_sigma: object
    pooled_u: object
    backend: str = FLOAT
    n_samples: list[int] = field(default_factory=list)
    mean_sq_y: float | None = None
    mean_sq_ys: list | None = None
    pd_flags: list[bool] | None = None
    scaling: np.ndarray | None = None
    env_means: list | None = None
    env_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.backend == FLOAT:
            sig = [np.ascontiguousarray(s, dtype=float) for s in self.sigmas]
            uu = [np.ascontiguousarray(u, dtype=float) for u in self.us]
            for arr in sig + uu:
                arr.setflags(write=False)
            object.__setattr__(self, "sigmas", sig)
            object.__setattr__(self, "us", uu)
            ps = np.ascontiguousarray(self.pooled_sigma, dtype=float)
            pu = np.ascontiguousarray(self.pooled_u, dtype=float)
            ps.setflags(write=False)
            pu.setflags(write=False)
            object.__setattr__(self, "pooled_sigma", ps)
            object.__setattr__(self, "pooled_u", pu)
        if not self.n_samples:
            object.__setattr__(self, "n_samples", [0] * len(self.sigmas))
        if not self.env_ids:
            object.__setattr__(self, "env_ids", [f"e{i + 1}" for i in range(len(self.sigmas))])

    @property
    def d(self) -> int:
        if self.backend == FLOAT:
            return self.pooled_sigma.shape[0]
        return len(self.pooled_u)

    @property
    def n_envs(self) -> int:
        return len(self.sigmas)

    @classmethod
    def from_moments(cls, sigmas, us, backend=FLOAT, **kwargs) -> "EnvMomentSet":
        """Build a moment set from per-environment (Sigma, u), pooling internally."""
        n_env = len(sigmas)
        if n_env == 0 or len(us) != n_env:
            raise ValueError("need matching, nonempty sigma/u lists")
        if backend == FLOAT:
            sigmas = [np.asarray(s, dtype=float) for s in sigmas]
            us = [np.asarray(u, dtype=float) for u in us]
            pooled_sigma = sum(sigmas) / n_env
            pooled_u = sum(us) / n_env
            kwargs.setdefault("pd_flags", [bool(np.linalg.eigvalsh(s)[0] > 0) for s in sigmas])
        else:
            d = len(us[0])
            w = Fraction(1, n_env)
            pooled_sigma = [
                [sum(sigmas[e][i][j] for e in range(n_env)) * w for j in range(d)]
                for i in range(d)
            ]
            pooled_u = [sum(us[e][i] for e in range(n_env)) * w for i in range(d)]
            kwargs.setdefault(
                "pd_flags",
                [bool(np.linalg.eigvalsh(np.array(s, dtype=float))[0] > 0) for s in sigmas],
            )
        return cls(sigmas, us, pooled_sigma, pooled_u, backend=backend, **kwargs)

    def sigma_of(self, env: int):
        return self.sigmas[env]

    def to_float(self) -> "EnvMomentSet":
        if self.backend == FLOAT:
            return self
        sig = [np.array(s, dtype=float) for s in self.sigmas]
        uu = [np.array(u, dtype=float) for u in self.us]
        return EnvMomentSet.from_moments(
            sig, uu, backend=FLOAT, n_samples=list(self.n_samples),
            mean_sq_y=float(self.mean_sq_y) if self.mean_sq_y is not None else None,
            env_ids=list(self.env_ids),
        )


@dataclass(frozen=True)
class RestrictedCoef:
    """Least-squares coefficients restricted to a support set S (zero outside)."""

    S: tuple[int, ...]
    per_env: list
    pooled: object
    backend: str = FLOAT


def _check_set(S, d) -> tuple[int, ...]:
    S = tuple(sorted(set(int(j) for j in S)))
    if S and (S[0] < 0 or S[-1] >= d):
        raise ValueError(f"index set {S} out of range for d={d}")
    return S


def restricted_ls(m: EnvMomentSet, S) -> RestrictedCoef:
    """Per-environment and pooled least squares restricted to support S.

    Solves the |S| x |S| systems Sigma_S beta_S = u_S; S = () returns all-zero
    vectors.  Raises `SingularMatrixError` naming the offending environment.
    """
    S = _check_set(S, m.d)
    d = m.d
    if m.backend == FLOAT:
        if not S:
            zero = np.zeros(d)
            return RestrictedCoef(S, [zero.copy() for _ in range(m.n_envs)], zero)
        idx = np.asarray(S)
        per_env = []
        for e in range(m.n_envs):
            beta = np.zeros(d)
            beta[idx] = solve_float(
                m.sigmas[e][np.ix_(idx, idx)], m.us[e][idx], label=f"environment {m.env_ids[e]}"
            )
            per_env.append(beta)
        pooled = np.zeros(d)
        pooled[idx] = solve_float(
            m.pooled_sigma[np.ix_(idx, idx)], m.pooled_u[idx], label="pooled"
        )
        return RestrictedCoef(S, per_env, pooled)

    zero = [Fraction(0)] * d
    if not S:
        return RestrictedCoef(S, [list(zero) for _ in range(m.n_envs)], list(zero), backend=EXACT)
    per_env = []
    for e in range(m.n_envs):
        try:
            sol = exact_solve(submatrix(m.sigmas[e], S), subvector(m.us[e], S))
        except SingularMatrixError as err:
            raise SingularMatrixError(
                f"singular submatrix in environment {m.env_ids[e]}", environment=m.env_ids[e]
            ) from err
        beta = list(zero)
        for pos, j in enumerate(S):
            beta[j] = sol[pos]
        per_env.append(beta)
    sol = exact_solve(submatrix(m.pooled_sigma, S), subvector(m.pooled_u, S))
    pooled = list(zero)
    for pos, j in enumerate(S):
        pooled[j] = sol[pos]
    return RestrictedCoef(S, per_env, pooled, backend=EXACT)


def pooled_risk(beta, m: EnvMomentSet, mean_sq_y: float | None = None) -> float:
    """Pooled least-squares risk 0.5 b'Sigma b - b'u + 0.5 E[Y^2].

    `mean_sq_y` is supplied (or taken from the moment set) because second
    moments of X alone do not determine E[Y^2].
    """
    if mean_sq_y is None:
        mean_sq_y = m.mean_sq_y
        if mean_sq_y is None:
            raise ValueError("mean_sq_y not stored in the moment set; pass it explicitly")
    if m.backend == FLOAT:
        beta = np.asarray(beta, dtype=float)
        return float(0.5 * beta @ m.pooled_sigma @ beta - beta @ m.pooled_u + 0.5 * mean_sq_y)
    d = m.d
    quad = sum(beta[i] * m.pooled_sigma[i][j] * beta[j] for i in range(d) for j in range(d))
    lin = sum(beta[i] * m.pooled_u[i] for i in range(d))
    return quad / 2 - lin + mean_sq_y / 2


def moments_from_samples(
    data: MultiEnvDataset, normalize: bool = False, center: bool = True
) -> EnvMomentSet:
    """Estimate per-environment and pooled moments from samples.

    Environments are pooled with equal weight 1/|E| regardless of their
    sample sizes.  By default each environment is centered by its own means
    first (means are recorded).  With ``normalize=True`` the columns are
    rescaled so the pooled Sigma has a unit diagonal, and the scaling vector
    is recorded so fitted coefficients can be mapped back.
    """
    sigmas, us, msqs, means = [], [], [], []
    for X, y in data.environments:
        n = X.shape[0]
        if center:
            xm = X.mean(axis=0)
            ym = float(y.mean())
            X = X - xm
            y = y - ym
        else:
            xm = np.zeros(X.shape[1])
            ym = 0.0
        means.append((xm, ym))
        sigmas.append(X.T @ X / n)
        us.append(X.T @ y / n)
        msqs.append(float(y @ y / n))
    n_env = len(sigmas)
    scaling = None
    if normalize:
        pooled_diag = sum(np.diag(s) for s in sigmas) / n_env
        if np.any(pooled_diag <= 0):
            bad = int(np.argmin(pooled_diag))
            raise ValueError(f"zero-variance column x{bad + 1}: cannot normalize")
        scaling = np.sqrt(pooled_diag)
        outer = np.outer(scaling, scaling)
        sigmas = [s / outer for s in sigmas]
        us = [u / scaling for u in us]
    return EnvMomentSet.from_moments(
        sigmas,
        us,
        backend=FLOAT,
        n_samples=data.sample_sizes(),
        mean_sq_y=float(np.mean(msqs)),
        mean_sq_ys=msqs,
        scaling=scaling,
        env_means=means,
        env_ids=list(data.env_ids),
    )


def is_invariant_set(m: EnvMomentSet, S, tol: float = 1e-9) -> bool:
    """Whether beta^(e,S) coincides with beta^(S) in every environment.

    Exact backend: exact equality.  Float backend: max coefficient
    difference at most `tol`.
    """
    coef = restricted_ls(m, S)
    if not coef.S:
        return True
    if m.backend == FLOAT:
        return max(np.max(np.abs(b - coef.pooled)) for b in coef.per_env) <= tol
    return all(is_zero(b[j] - coef.pooled[j]) for b in coef.per_env for j in coef.S)
