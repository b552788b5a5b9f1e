import numpy as np
import pytest
import sympy as sp

import igrlab as il
from igrlab.moments import moments_from_samples
from igrlab.scm import BLOCK_ORTHOGONAL, GENERAL, NO_ANCESTOR_INTERVENTION, LinearScm
from igrlab.weights import weight_table


def test_example_2_1_displayed_moments(ex21_oracle):
    s15 = sp.sqrt(15)
    s5 = sp.sqrt(5)
    expected_sigma1 = sp.Matrix(
        [
            [1, 0, 2 / s15, 0],
            [0, 1, 1 / s15, 0],
            [2 / s15, 1 / s15, sp.Rational(3, 5), 0],
            [0, 0, 0, 1],
        ]
    )
    expected_sigma2 = sp.Matrix(
        [
            [1, 0, 2 / s5, 0],
            [0, 1, 1 / s5, 0],
            [2 / s5, 1 / s5, sp.Rational(7, 5), 0],
            [0, 0, 0, 1],
        ]
    )
    got1 = sp.Matrix(ex21_oracle.sigmas[0])
    got2 = sp.Matrix(ex21_oracle.sigmas[1])
    assert sp.simplify(got1 - expected_sigma1) == sp.zeros(4, 4)
    assert sp.simplify(got2 - expected_sigma2) == sp.zeros(4, 4)
    exp_u1 = sp.Matrix([2, 1, 2 * sp.sqrt(sp.Rational(3, 5)), 0])
    exp_u2 = sp.Matrix([2, 1, 6 / s5, 0])
    assert sp.simplify(sp.Matrix(ex21_oracle.us[0]) - exp_u1) == sp.zeros(4, 1)
    assert sp.simplify(sp.Matrix(ex21_oracle.us[1]) - exp_u2) == sp.zeros(4, 1)
    assert ex21_oracle.s_star == (0, 1)
    assert [float(b) for b in ex21_oracle.beta_star] == [2.0, 1.0, 0.0, 0.0]


def test_example_3_1_oracle(ex31_oracle):
    for sig in ex31_oracle.sigmas:
        diag = [sp.simplify(sig[j][j]) for j in range(3)]
        assert diag == [1, 1, 1]
    assert ex31_oracle.s_star == (0,)
    assert ex31_oracle.endogenous == (1, 2)
    assert ex31_oracle.exogenous == ()
    # exogeneity of the causal variable holds exactly in both environments
    for e in range(2):
        assert sp.simplify(ex31_oracle.x_eps_cov[e][0]) == 0


def test_example_2_2_oracle():
    oracle = il.population_moments(il.make_example("ex2_2"))
    assert oracle.s_star == (0,)
    m = oracle.moments()
    assert m.sigmas[0][1, 1] == pytest.approx(1.25)
    assert m.sigmas[1][1, 1] == pytest.approx(5.0)


def test_unknown_example_rejected():
    with pytest.raises(ValueError, match="unknown example"):
        il.make_example("nope")


def test_response_row_must_be_invariant():
    coeffs = [[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [2.0, 0.0]]]
    with pytest.raises(ValueError, match="invariant"):
        LinearScm(coeffs, [[1.0, 1.0]] * 2, y_index=1)


def test_cycle_rejected():
    coeffs = [[[0.0, 1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]]]
    with pytest.raises(ValueError, match="cyclic"):
        LinearScm(coeffs, [[1.0] * 3], y_index=2)


def test_sampling_determinism_and_boundaries():
    scm = il.make_example("ex3_1")
    a = il.sample(scm, 50, seed=11)
    b = il.sample(scm, 50, seed=11)
    for (Xa, ya), (Xb, yb) in zip(a.environments, b.environments):
        assert np.array_equal(Xa, Xb) and np.array_equal(ya, yb)
    c = il.sample(scm, 50, seed=12)
    assert not np.array_equal(a.environments[0][0], c.environments[0][0])
    tiny = il.sample(scm, 1, seed=0)
    assert all(X.shape == (1, 3) for X, _ in tiny.environments)
    with pytest.raises(ValueError):
        il.sample(scm, 0)


def test_sampled_moments_converge(ex31_oracle):
    scm = il.make_example("ex3_1")
    pop = ex31_oracle.moments()
    errs = {}
    for n in (10_000, 40_000):
        errors = []
        for seed in range(20):
            m = moments_from_samples(il.sample(scm, n, seed=seed), center=False)
            errors.append(
                max(
                    np.max(np.abs(m.sigmas[e] - pop.sigmas[e]))
                    for e in range(2)
                )
            )
        errs[n] = float(np.median(errors))
    # parametric rate: quadrupling n should at least halve the median error
    assert errs[40_000] < 0.5 * errs[10_000] * 1.25  # slack for median noise
    m = moments_from_samples(il.sample(scm, 100_000, seed=0), center=False)
    se = 3.0 * 4.0 / np.sqrt(100_000)
    for e in range(2):
        assert np.max(np.abs(m.sigmas[e] - pop.sigmas[e])) < se
        assert np.max(np.abs(m.us[e] - pop.us[e])) < se


def test_block_orthogonal_regime_weights():
    for seed in range(5):
        scm = il.random_scm(6, regime=BLOCK_ORTHOGONAL, seed=seed, block_size=2)
        oracle = il.population_moments(scm)
        wt = weight_table(oracle.moments(), 2)
        for j in oracle.s_star:
            assert wt.values[j] <= 1e-10
        # cross-block covariance really is zero
        m = oracle.moments()
        s_star = oracle.s_star
        for a in s_star:
            for b in s_star:
                if abs(a - b) >= 2:
                    for e in range(2):
                        assert abs(m.sigmas[e][a, b]) < 1e-12


def test_no_ancestor_intervention_regime_weights():
    for seed in range(5):
        scm = il.random_scm(6, regime=NO_ANCESTOR_INTERVENTION, seed=seed)
        oracle = il.population_moments(scm)
        wt = weight_table(oracle.moments(), 1)
        for j in oracle.s_star:
            assert wt.values[j] <= 1e-10


def test_general_regime_has_detectable_endogeneity():
    found = 0
    for seed in range(8):
        scm = il.random_scm(6, regime=GENERAL, seed=seed)
        oracle = il.population_moments(scm)
        if not oracle.endogenous:
            continue
        wt = weight_table(oracle.moments(), 2)
        if any(wt.values[j] > 1e-8 for j in oracle.endogenous):
            found += 1
    assert found >= 4


def test_oracle_matches_empirical_weights(ex31_oracle):
    # independent route to the worked example's weights: large-sample refit
    scm = il.make_example("ex3_1")
    m = moments_from_samples(il.sample(scm, 200_000, seed=5), center=True)
    wt = weight_table(m, 1)
    assert np.allclose(wt.values, [0.0, 1 / 36, 25 / 144], atol=2e-3)
