"""Linear acyclic structural causal models over multiple environments.

Generates both samples and exact population moments.  The response's
structural assignment (coefficients and noise scale) is identical across
environments; heterogeneity enters only through the covariate assignments.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .dataset import MultiEnvDataset
from .moments import EXACT, FLOAT, EnvMomentSet

EXAMPLE_NAMES = ("ex2_1", "ex2_2", "ex3_1")


def _is_exact_scalar(x) -> bool:
    if isinstance(x, (int, Fraction)):
        return True
    return x.__class__.__module__.startswith("sympy")


@dataclass(frozen=True)
class LinearScm:
    """d covariates plus one response, each assigned linearly from its parents.

    ``coeffs[e][j, l]`` is the effect of variable l on variable j in
    environment e; ``noise_scales[e][j]`` multiplies the standard normal
    exogenous noise of variable j.  The response lives at index ``y_index``
    (by convention the last of the p = d+1 variables).
    """

    coeffs: list  # per environment, p x p nested lists or arrays
    noise_scales: list  # per environment, length-p sequences
    y_index: int
    env_ids: list[str] = field(default_factory=list)

    def __post_init__(self):
        p = self.p
        if len(self.noise_scales) != self.n_envs:
            raise ValueError("coeffs and noise_scales must have one entry per environment")
        for C in self.coeffs:
            if len(C) != p or any(len(row) != p for row in C):
                raise ValueError("coefficient matrices must be p x p")
        yrow0 = [self.coeffs[0][self.y_index][l] for l in range(p)]
        for e in range(1, self.n_envs):
            if any(self.coeffs[e][self.y_index][l] != yrow0[l] for l in range(p)):
                raise ValueError("the response assignment must be invariant across environments")
            if self.noise_scales[e][self.y_index] != self.noise_scales[0][self.y_index]:
                raise ValueError("the response noise scale must be invariant across environments")
        self.topological_order()  # validates acyclicity
        if not self.env_ids:
            object.__setattr__(self, "env_ids", [f"e{i + 1}" for i in range(self.n_envs)])

    @property
    def p(self) -> int:
        return len(self.coeffs[0])

    @property
    def d(self) -> int:
        return self.p - 1

    @property
    def n_envs(self) -> int:
        return len(self.coeffs)

    @property
    def exact(self) -> bool:
        return all(
            _is_exact_scalar(v)
            for e in range(self.n_envs)
            for row in self.coeffs[e]
            for v in row
        ) and all(_is_exact_scalar(s) for e in range(self.n_envs) for s in self.noise_scales[e])

    def parents(self, j: int) -> tuple[int, ...]:
        out = set()
        for e in range(self.n_envs):
            out.update(l for l in range(self.p) if self.coeffs[e][j][l] != 0)
        return tuple(sorted(out))

    def topological_order(self) -> list[int]:
        """Order of the union graph; raises on cycles."""
        p = self.p
        indeg = [len(self.parents(j)) for j in range(p)]
        children = [[] for _ in range(p)]
        for j in range(p):
            for l in self.parents(j):
                children[l].append(j)
        order = [j for j in range(p) if indeg[j] == 0]
        head = 0
        while head < len(order):
            v = order[head]
            head += 1
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    order.append(c)
        if len(order) != p:
            raise ValueError("cyclic structural graph")
        return order

    def beta_star(self):
        """Invariant response coefficients on the covariates."""
        row = self.coeffs[0][self.y_index]
        return [row[l] for l in range(self.p) if l != self.y_index]

    def s_star(self) -> tuple[int, ...]:
        b = self.beta_star()
        return tuple(j for j, v in enumerate(b) if v != 0)


@dataclass(frozen=True)
class ScmOracle:
    """Closed-form population quantities of a LinearScm.

    `sigmas`/`us`/`ey2s` are per-environment E[XX'], E[XY], E[Y^2];
    `x_eps_cov[e][j]` is E[X_j eps] with eps the response's structural
    noise.  Variables outside the causal support split into `endogenous`
    (pooled E[X_j eps] != 0) and `exogenous` ones.
    """

    sigmas: list
    us: list
    ey2s: list
    beta_star: object
    s_star: tuple[int, ...]
    x_eps_cov: list
    endogenous: tuple[int, ...]
    exogenous: tuple[int, ...]
    exact: bool = False

    def moments(self) -> EnvMomentSet:
        """Float population moment set (sample sizes recorded as 0)."""
        sig = [np.array(s, dtype=float) for s in self.sigmas]
        uu = [np.array(u, dtype=float) for u in self.us]
        return EnvMomentSet.from_moments(
            sig, uu, backend=FLOAT, mean_sq_y=float(np.mean([float(v) for v in self.ey2s]))
        )

    def exact_moments(self) -> EnvMomentSet:
        if not self.exact:
            raise ValueError("oracle was built from a non-exact SCM")
        msq = sum(self.ey2s, 0) / len(self.ey2s)
        return EnvMomentSet.from_moments(
            [s for s in self.sigmas], [u for u in self.us], backend=EXACT, mean_sq_y=msq
        )


def population_moments(scm: LinearScm, zero_tol: float = 1e-12) -> ScmOracle:
    """Propagate covariances through the SCM exactly (symbolically when possible).

    With z = (I - C)^-1 diag(s) U and unit-variance independent noises,
    Cov(z) = T diag(s^2) T' for T = (I - C)^-1.
    """
    exact = scm.exact
    p, y = scm.p, scm.y_index
    x_idx = [j for j in range(p) if j != y]
    sigmas, us, ey2s, xeps = [], [], [], []
    if exact:
        import sympy as sp

        for e in range(scm.n_envs):
            C = sp.Matrix(scm.coeffs[e])
            T = (sp.eye(p) - C).inv()
            D = sp.diag(*[sp.sympify(s) ** 2 for s in scm.noise_scales[e]])
            M = sp.expand(T * D * T.T)
            sigmas.append([[sp.simplify(M[i, j]) for j in x_idx] for i in x_idx])
            us.append([sp.simplify(M[i, y]) for i in x_idx])
            ey2s.append(sp.simplify(M[y, y]))
            sy2 = sp.sympify(scm.noise_scales[e][y]) ** 2
            xeps.append([sp.simplify(T[i, y] * sy2) for i in x_idx])
        beta_star = [sp.sympify(v) for v in scm.beta_star()]
    else:
        for e in range(scm.n_envs):
            C = np.array(scm.coeffs[e], dtype=float)
            T = np.linalg.solve(np.eye(p) - C, np.eye(p))
            s2 = np.array(scm.noise_scales[e], dtype=float) ** 2
            M = T @ np.diag(s2) @ T.T
            sigmas.append(M[np.ix_(x_idx, x_idx)])
            us.append(M[x_idx, y])
            ey2s.append(float(M[y, y]))
            xeps.append(T[x_idx, y] * s2[y])
        beta_star = np.array([float(v) for v in scm.beta_star()])
    s_star = scm.s_star()
    d = scm.d
    pooled = [sum(xeps[e][j] for e in range(scm.n_envs)) for j in range(d)]
    if exact:
        nonzero = [not bool((v / scm.n_envs).simplify() == 0) for v in pooled]
    else:
        scale = max(1.0, max(abs(float(v)) for v in pooled))
        nonzero = [abs(float(v) / scm.n_envs) > zero_tol * scale for v in pooled]
    endo = tuple(j for j in range(d) if j not in s_star and nonzero[j])
    exo = tuple(j for j in range(d) if j not in s_star and not nonzero[j])
    return ScmOracle(
        sigmas=sigmas, us=us, ey2s=ey2s, beta_star=beta_star, s_star=s_star,
        x_eps_cov=xeps, endogenous=endo, exogenous=exo, exact=exact,
    )


def sample(scm: LinearScm, n: int, seed: int | None = None) -> MultiEnvDataset:
    """Ancestral sampling with standard normal noises; deterministic under seed."""
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(seed)
    order = scm.topological_order()
    p, y = scm.p, scm.y_index
    x_idx = [j for j in range(p) if j != y]
    envs = []
    for e in range(scm.n_envs):
        C = np.array([[float(v) for v in row] for row in scm.coeffs[e]])
        s = np.array([float(v) for v in scm.noise_scales[e]])
        U = rng.standard_normal((n, p))
        Z = np.zeros((n, p))
        for j in order:
            Z[:, j] = Z @ C[j] + s[j] * U[:, j]
        envs.append((Z[:, x_idx], Z[:, y]))
    return MultiEnvDataset(envs, env_ids=list(scm.env_ids))


def make_example(name: str) -> LinearScm:
    """The hand-built worked examples, with exact (symbolic) scale factors.

    ``ex3_1``: one causal variable, two reverse-causal ones whose effects
    shrink differently in the second environment.  ``ex2_1``: two causal
    variables, one response child with environment-dependent loading, one
    independent extra.  ``ex2_2``: a single causal variable plus a response
    child intervened so strongly that no maximum invariant set exists.
    """
    import sympy as sp

    half = sp.Rational(1, 2)
    if name == "ex3_1":
        p, y = 4, 3
        Cs, Ss = [], []
        for c2, c3, s2, s3 in [
            (sp.Rational(2, 3), sp.Rational(2, 3), sp.Rational(1, 3), sp.Rational(1, 3)),
            (half, sp.Rational(1, 4), 1 / sp.sqrt(2), sp.sqrt(sp.Rational(7, 8))),
        ]:
            C = [[sp.Integer(0)] * p for _ in range(p)]
            C[y][0] = sp.Integer(1)  # response <- X1
            C[1][y] = c2
            C[2][y] = c3
            Cs.append(C)
            Ss.append([sp.Integer(1), s2, s3, sp.Integer(1)])
        return LinearScm(Cs, Ss, y_index=y)
    if name == "ex2_1":
        p, y = 5, 4
        Cs, Ss = [], []
        for e in (1, 2):
            C = [[sp.Integer(0)] * p for _ in range(p)]
            C[y][0] = sp.Integer(2)
            C[y][1] = sp.Integer(1)
            C[2][y] = sp.sqrt(3) ** (e - 2) / sp.sqrt(5)
            Cs.append(C)
            Ss.append([sp.Integer(1), sp.Integer(1), 1 / sp.sqrt(5), sp.Integer(1), sp.Integer(1)])
        return LinearScm(Cs, Ss, y_index=y)
    if name == "ex2_2":
        p, y = 3, 2
        Cs, Ss = [], []
        for e in (1, 2):
            C = [[sp.Integer(0)] * p for _ in range(p)]
            C[y][0] = sp.Integer(1)
            C[1][y] = sp.Integer(2) ** (2 * e - 3)
            Cs.append(C)
            Ss.append([sp.sqrt(half), sp.Integer(1), sp.sqrt(half)])
        return LinearScm(Cs, Ss, y_index=y)
    raise ValueError(f"unknown example {name!r}; choose from {EXAMPLE_NAMES}")


GENERAL = "general"
BLOCK_ORTHOGONAL = "block-orthogonal"
NO_ANCESTOR_INTERVENTION = "no-ancestor-intervention"


def _draw_coef(rng: np.random.Generator) -> float:
    # magnitudes in [0.2, 1.0] with random sign
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(0.2, 1.0))


def random_scm(
    d: int,
    regime: str = GENERAL,
    seed: int | None = None,
    *,
    block_size: int = 2,
    n_envs: int = 2,
) -> LinearScm:
    """Random two-environment SCM in one of three heterogeneity regimes.

    general
        Random DAG among the covariates, random per-environment coefficient
        perturbations everywhere except the response assignment.
    block-orthogonal
        The causal variables split into mutually independent blocks of size
        at most `block_size` (within-block structure may vary by
        environment); searching at budget k = block_size then certifies
        zero weights on all causal variables.
    no-ancestor-intervention
        Every ancestor of the response keeps one fixed assignment across
        environments; only the response's children are intervened on, so
        already k = 1 certifies the causal variables.

    Response children are rescaled toward unit variance; the coefficient
    ranges are fixed here for reproducibility.
    """
    if d < 2:
        raise ValueError("need d >= 2")
    if regime not in (GENERAL, BLOCK_ORTHOGONAL, NO_ANCESTOR_INTERVENTION):
        raise ValueError(f"unknown regime {regime!r}")
    rng = np.random.default_rng(seed)
    p, y = d + 1, d
    n_causal = max(1, d // 2 if regime == BLOCK_ORTHOGONAL else d // 3 + 1)
    n_children = max(1, (d - n_causal) // 2)
    causal = list(range(n_causal))
    children = list(range(n_causal, n_causal + n_children))
    others = list(range(n_causal + n_children, d))

    Cs = [np.zeros((p, p)) for _ in range(n_envs)]
    Ss = [np.ones(p) for _ in range(n_envs)]
    beta = {j: _draw_coef(rng) for j in causal}
    for j, v in beta.items():
        for e in range(n_envs):
            Cs[e][y][j] = v

    def vary(base: float, e: int) -> float:
        return base * float(rng.uniform(0.5, 1.5)) if e > 0 else base

    if regime == GENERAL:
        # random DAG order over causal + other covariates, env-varying edges
        upstream = list(rng.permutation(causal + others))
        for pos, j in enumerate(upstream):
            for l in upstream[:pos]:
                if rng.uniform() < 0.3:
                    base = _draw_coef(rng)
                    for e in range(n_envs):
                        Cs[e][int(j)][int(l)] = vary(base, e)
    elif regime == BLOCK_ORTHOGONAL:
        blocks = [causal[i : i + block_size] for i in range(0, len(causal), block_size)]
        for block in blocks:
            for pos, j in enumerate(block[1:], start=1):
                base = _draw_coef(rng)
                for e in range(n_envs):
                    Cs[e][j][block[pos - 1]] = vary(base, e)
    else:  # no intervention on any ancestor of the response
        upstream = causal + others
        for pos, j in enumerate(upstream):
            for l in upstream[:pos]:
                if rng.uniform() < 0.3:
                    base = _draw_coef(rng)
                    for e in range(n_envs):
                        Cs[e][j][l] = base

    for j in children:
        base = _draw_coef(rng)
        for e in range(n_envs):
            Cs[e][j][y] = base if e == 0 else base * float(rng.uniform(0.3, 1.2))

    scm = LinearScm([C.tolist() for C in Cs], [S.tolist() for S in Ss], y_index=y)
    # rescale response children toward unit variance, per environment
    oracle = population_moments(scm)
    for e in range(n_envs):
        var_y = float(oracle.ey2s[e])
        for j in children:
            a = Cs[e][j][y]
            if a * a * var_y >= 0.95:
                a = 0.9 * np.sign(a) * np.sqrt(0.95 / var_y)
                Cs[e][j][y] = a
            Ss[e][j] = float(np.sqrt(max(1.0 - a * a * var_y, 0.05)))
    return LinearScm([C.tolist() for C in Cs], [S.tolist() for S in Ss], y_index=y)
