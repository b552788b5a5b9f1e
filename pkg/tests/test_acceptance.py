"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Tolerances are pinned in the assertions; nothing is deferred to
later calibration.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

import igrlab as il
from conftest import random_moment_set
from helpers import fista_solve
from igrlab.lab import (
    CnfFormula,
    enumerate_invariant_sets,
    is_maximum_invariant_set,
    random_3cnf,
    reduce_3sat,
    reduced_invariant_sets,
    sat_brute_force,
    separation_diagnostics,
    with_parity_constraint,
)
from igrlab.moments import restricted_ls
from igrlab.scm import BLOCK_ORTHOGONAL, NO_ANCESTOR_INTERVENTION
from igrlab.weights import weight_table
from test_sat import PROBLEM_1


def _report(name: str, ok: bool, detail: str = "") -> None:
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {name}: {status}" + (f" ({detail})" if detail else ""))
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def corpus():
    rng = np.random.default_rng(20240801)
    formulas = []
    for k, count in ((1, 20), (2, 18), (3, 14)):
        for _ in range(count):
            formulas.append(random_3cnf(k, int(rng.integers(1, 3 * k + 1)), rng))
    return formulas


def test_parsimony_of_reduction(corpus):
    t0 = time.perf_counter()
    checked = 0
    for f in corpus:
        inst = reduce_3sat(f)
        sat_count, _ = sat_brute_force(f, return_assignments=False)
        inv = enumerate_invariant_sets(inst)
        assert len(inv.nontrivial) == sat_count, f"parsimony broken for {f.clauses}"
        checked += 1
    # the nine-clause worked example exceeds the exhaustive-scan cap; its
    # invariant sets come from the structured complete search instead
    sat_count, sols = sat_brute_force(PROBLEM_1)
    sets = reduced_invariant_sets(reduce_3sat(PROBLEM_1))
    assert sat_count == 1 and len(sets) == 1
    from igrlab.lab import decode_solution

    assert decode_solution(sets[0], PROBLEM_1).assignment == sols[0]
    elapsed = time.perf_counter() - t0
    _report(
        "parsimony-of-reduction",
        checked == len(corpus) and elapsed <= 300.0,
        f"{checked} formulas + 9-clause example, {elapsed:.1f}s",
    )


def test_example_2_1_reproduction(ex21_instance):
    t0 = time.perf_counter()
    enum = enumerate_invariant_sets(ex21_instance)
    expected = [(0,), (1,), (3,), (0, 1), (0, 3), (1, 3), (0, 1, 3)]
    ok_sets = enum.sets == expected
    maximal = [
        S for S in enum.sets if is_maximum_invariant_set(ex21_instance, S, enumeration=enum)
    ]
    ok_max = maximal == [(0, 1), (0, 1, 3)]
    elapsed = time.perf_counter() - t0
    _report(
        "example-2.1-reproduction",
        ok_sets and ok_max and elapsed < 1.0,
        f"sets={ok_sets} max={ok_max} {elapsed * 1000:.0f}ms",
    )


def test_example_2_2_reproduction(ex22_instance):
    from igrlab.moments import is_invariant_set

    t0 = time.perf_counter()
    enum = enumerate_invariant_sets(ex22_instance)
    ok_sets = enum.sets == [(0,), (1,)]
    ok_pair = not is_invariant_set(ex22_instance.moments, (0, 1))
    ok_no_max = not any(
        is_maximum_invariant_set(ex22_instance, S, enumeration=enum)
        for S in [(), (0,), (1,)]
    )
    elapsed = time.perf_counter() - t0
    _report(
        "example-2.2-reproduction",
        ok_sets and ok_pair and ok_no_max and elapsed < 1.0,
        f"{elapsed * 1000:.0f}ms",
    )


def test_eigenvalue_and_variance_bounds(corpus):
    from igrlab.exactalg import int_bareiss_solve

    worst_margin = np.inf
    for f in corpus:
        inst = reduce_3sat(f)
        d = inst.d
        sigma2 = np.array([[float(v) for v in row] for row in inst.moments.sigmas[1]])
        ev = np.linalg.eigvalsh(sigma2)
        assert 4 * d <= ev[0] and ev[-1] <= 6 * d, f"eigen bound broken at d={d}"
        s2x2 = inst.sigma2_x2
        u2x2 = inst.u2_x2
        x = int_bareiss_solve(
            [[int(v) for v in row] for row in s2x2], [int(v) for v in u2x2]
        )
        energy2 = sum(Fraction(int(u)) * xi for u, xi in zip(u2x2, x)) / 2
        total = Fraction(d) + energy2  # E[Y1^2] = 1'I^-1 1 = d exactly
        assert total <= 10 * d * d
        worst_margin = min(worst_margin, float(10 * d * d - total))
    _report(
        "eigenvalue-variance-bounds",
        True,
        f"{len(corpus)} instances, slack >= {worst_margin:.1f}",
    )


def test_separation_gaps():
    rng = np.random.default_rng(7)
    reports = []
    t0 = time.perf_counter()
    for k in (1, 1, 1, 1, 2):
        f = random_3cnf(k, int(rng.integers(1, 3 * k + 1)), rng)
        reports.append(separation_diagnostics(reduce_3sat(f)))
    # d = 22: full exact scan is out of desk-scale reach (4.2M subsets);
    # cover all invariant sets, their one-coordinate perturbations, and a
    # seeded random slice, all still evaluated in exact rationals
    f3 = random_3cnf(3, 6, rng)
    inst3 = reduce_3sat(f3)
    d3 = inst3.d
    inv3 = enumerate_invariant_sets(inst3).sets
    sample = {tuple(S) for S in inv3}
    for S in inv3:
        for j in range(d3):
            sample.add(tuple(sorted(set(S) ^ {j})))
    sample.discard(())
    sample.update(
        tuple(sorted(rng.choice(d3, size=rng.integers(1, d3 + 1), replace=False)))
        for _ in range(1500)
    )
    reports.append(separation_diagnostics(inst3, subsets=sorted(sample)))
    ok = all(r.all_ok for r in reports)
    n_full = sum(1 for r in reports if r.coverage == "full")
    checked = sum(r.n_checked for r in reports)
    elapsed = time.perf_counter() - t0
    for r in reports:
        assert not r.het_violations and not r.dist_violations
        assert r.energy_env1 == r.d  # E[Y^(1)^2] = d exactly
    _report(
        "separation-gaps",
        ok,
        f"{n_full} full scans (d<=15) + sampled d=22, {checked} subsets, {elapsed:.0f}s",
    )


def test_weight_values_section_3_1(ex31_moments):
    # Stated expected values (0, 1/6, 1/4) on the squared scale.  The worked
    # example's closed-form moments give (0, 1/36, 25/144) on that scale
    # (square roots (0, 1/6, 5/12)), which the solution-path geometry
    # corroborates, so this criterion cannot pass as stated; see the
    # decisions ledger.  The assertion is kept faithful rather than adjusted.
    wt = weight_table(ex31_moments, 1)
    expected = np.array([0.0, 1 / 6, 1 / 4])
    ok = bool(np.allclose(wt.values, expected, atol=1e-12))
    _report(
        "weight-values-3.1",
        ok,
        f"squared-scale w1 = {wt.values.tolist()}, stated {expected.tolist()}",
    )


def test_causal_identification(ex31_oracle, ex31_moments):
    wt = weight_table(ex31_moments, 1)
    gstar = il.gamma_star(ex31_oracle, wt)
    fit = il.solve(ex31_moments, wt, 1.01 * gstar)
    ok_star = bool(np.max(np.abs(fit.beta - np.array([1.0, 0.0, 0.0]))) < 1e-6)
    ols = np.linalg.solve(ex31_moments.pooled_sigma, ex31_moments.pooled_u)
    fit0 = il.solve(ex31_moments, wt, 0.0)
    ok_ols = bool(np.max(np.abs(fit0.beta - ols)) < 1e-8)
    path = il.solution_path(ex31_moments, wt, list(np.linspace(0.0, 4.0, 41)))
    gone3 = min(g for g, s in zip(path.gammas, path.supports) if 2 not in s)
    gone2 = min(g for g, s in zip(path.gammas, path.supports) if 1 not in s)
    ok_order = gone3 <= gone2
    _report(
        "causal-identification",
        ok_star and ok_ols and ok_order,
        f"gamma*={gstar:.3f}, x3 exits at {gone3:.2f} <= x2 at {gone2:.2f}",
    )


def test_solver_optimality():
    rng = np.random.default_rng(99)
    worst_kkt = 0.0
    worst_gap = 0.0
    for _ in range(100):
        d = int(rng.integers(2, 31))
        m = random_moment_set(rng, d=d)
        w = rng.uniform(0, 1.5, d) * (rng.uniform(size=d) > 0.25)
        gamma = float(rng.uniform(0, 1.2))
        lam = float(rng.uniform(0, 0.3)) * (rng.uniform() > 0.5)
        fit = il.solve(m, w, gamma, lam)
        worst_kkt = max(worst_kkt, fit.kkt)
        ref = fista_solve(m.pooled_sigma, m.pooled_u, gamma * w + lam, iters=20000)
        gap = il.objective(fit.beta, m, w, gamma, lam) - il.objective(ref, m, w, gamma, lam)
        worst_gap = max(worst_gap, abs(gap))
    _report(
        "solver-optimality",
        worst_kkt <= 1e-6 and worst_gap <= 1e-8,
        f"worst kkt {worst_kkt:.2e}, worst objective gap {worst_gap:.2e}",
    )


def test_strong_convexity_and_shrinkage(ex31_moments):
    rng = np.random.default_rng(11)
    instances = [ex31_moments] + [random_moment_set(rng, d=int(rng.integers(2, 7))) for _ in range(4)]
    worst_slack = np.inf
    for m in instances:
        wt = weight_table(m, min(2, m.d))
        sqrt_sigma = np.linalg.cholesky(m.pooled_sigma)
        ols = np.linalg.solve(m.pooled_sigma, m.pooled_u)
        bound = float(np.sqrt(ols @ m.pooled_sigma @ ols))
        for gamma in (0.0, 0.3, 1.0, 3.0):
            fit = il.solve(m, wt, gamma)
            norm = float(np.sqrt(fit.beta @ m.pooled_sigma @ fit.beta))
            assert norm <= bound + 1e-9, "shrinkage violated"
            base = fit.objective
            for _ in range(1000):
                beta = fit.beta + rng.standard_normal(m.d) * rng.uniform(0.01, 2.0)
                gap = il.objective(beta, m, wt, gamma) - base
                quad = 0.5 * float(np.sum((sqrt_sigma.T @ (beta - fit.beta)) ** 2))
                worst_slack = min(worst_slack, gap - quad)
        assert worst_slack >= -1e-9
    _report(
        "strong-convexity-shrinkage",
        worst_slack >= -1e-9,
        f"min (gap - quadratic) = {worst_slack:.2e} over {len(instances)} instances",
    )


def test_uncertainty_set_characterization(ex31_moments):
    rng = np.random.default_rng(13)
    worst_over = 0.0
    worst_proj = np.inf
    for m, gamma in [(ex31_moments, 1.5), (ex31_moments, 3.0)] + [
        (random_moment_set(rng, d=4), g) for g in (0.2, 0.8)
    ]:
        wt = weight_table(m, 1)
        fit = il.solve(m, wt, gamma)
        slack = il.uncertainty_membership(fit.beta, m, wt, gamma)
        worst_over = max(worst_over, float(-np.min(slack)))
        target = float(fit.beta @ m.pooled_sigma @ fit.beta)
        pw = wt.penalty_weights()
        for _ in range(1000):
            delta = rng.uniform(-1, 1, m.d) * gamma * pw
            member = np.linalg.solve(m.pooled_sigma, m.pooled_u + delta)
            worst_proj = min(worst_proj, float(member @ m.pooled_sigma @ member) - target)
    _report(
        "uncertainty-set",
        worst_over <= 1e-8 and worst_proj >= -1e-8,
        f"max overshoot {worst_over:.2e}, min member excess {worst_proj:.2e}",
    )


def test_restricted_invariance_regimes():
    worst = 0.0
    for regime, k in ((BLOCK_ORTHOGONAL, 2), (NO_ANCESTOR_INTERVENTION, 1)):
        for seed in range(10):
            scm = il.random_scm(6, regime=regime, seed=seed, block_size=2)
            oracle = il.population_moments(scm)
            wt = weight_table(oracle.moments(), k)
            for j in oracle.s_star:
                worst = max(worst, float(wt.values[j]))
    _report(
        "restricted-invariance",
        worst <= 1e-10,
        f"max causal weight {worst:.2e} over 20 draws",
    )


def test_rate_property():
    t0 = time.perf_counter()
    scm = il.make_example("ex3_1")
    tbl = il.rate_experiment(scm, k=1, gamma=0.3, n_grid=[250, 1000, 4000], seeds=range(20))
    monotone = all(tbl.medians[i] > tbl.medians[i + 1] for i in range(len(tbl.medians) - 1))
    ok_slope = -0.7 <= tbl.slope <= -0.3
    elapsed = time.perf_counter() - t0
    _report(
        "rate-property",
        monotone and ok_slope and elapsed <= 180.0,
        f"medians {[round(v, 4) for v in tbl.medians]}, slope {tbl.slope:.3f}, {elapsed:.0f}s",
    )


def test_xor_gadget():
    rng = np.random.default_rng(17)
    formulas = [
        CnfFormula(1, ((1, -1, 1),)),
        CnfFormula(3, ((1, 2, 3),)),
        random_3cnf(2, 5, rng),
        random_3cnf(2, 6, rng),
        random_3cnf(3, 6, rng),
    ]
    n_checked = 0
    for f in formulas:
        assert f.n_vars <= 6
        _, base = sat_brute_force(f)
        n = f.n_vars
        for mask_bits in range(1, 1 << n):
            mask = [(mask_bits >> j) & 1 for j in range(n)]
            g, _ = with_parity_constraint(f, mask)
            _, sols = sat_brute_force(g)
            projected = sorted({s[:n] for s in sols})
            expected = sorted(
                v for v in base if sum(b and mk for b, mk in zip(v, mask)) % 2 == 0
            )
            assert projected == expected, f"gadget mismatch at mask {mask}"
            n_checked += 1
    _report("xor-gadget", True, f"{len(formulas)} formulas, {n_checked} masks")


def test_distribution_shift_replacement():
    # stands in for the external-data tables: on a shifted test environment
    # the selected model must not lose to pooled least squares
    from igrlab.scm import LinearScm

    scm = il.make_example("ex3_1")
    p, y = 4, 3
    C = [[0.0] * p for _ in range(p)]
    C[y][0] = 1.0
    C[1][y] = 0.3
    C[2][y] = 1 / (3 * np.sqrt(2))
    S = [1.0, float(np.sqrt(1 - 0.3**2 * 2)), float(np.sqrt(8 / 9)), 1.0]
    shifted = LinearScm([C], [S], y_index=y)
    cfg = il.GridConfig(
        k=1, gammas=[0.0] + [2.0**i for i in range(-5, 6)], lambdas=[0.0], normalize=False
    )
    diffs, gammas = [], []
    for seed in range(20):
        train = il.sample(scm, 400, seed=seed)
        valid = il.sample(shifted, 400, seed=1000 + seed).environments[0]
        test = il.sample(shifted, 2000, seed=2000 + seed).environments[0]
        report = il.igr_fit(train, valid, cfg)
        Xt, yt = test
        Xt = Xt - Xt.mean(axis=0)
        yt = yt - yt.mean()
        diffs.append(il.mse(report.beta, Xt, yt) - il.mse(report.fits[(0, 0)].beta, Xt, yt))
        gammas.append(report.gamma)
    ok = float(np.median(gammas)) > 0 and float(np.median(diffs)) <= 0
    _report(
        "distribution-shift",
        ok,
        f"median gamma {np.median(gammas):.2f}, median mse delta {np.median(diffs):.1f}",
    )
