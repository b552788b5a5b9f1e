import numpy as np
import pytest

import igrlab as il
from igrlab.lab import LisInstance


@pytest.fixture(scope="session")
def ex31_oracle():
    return il.population_moments(il.make_example("ex3_1"))


@pytest.fixture(scope="session")
def ex31_moments(ex31_oracle):
    return ex31_oracle.moments()


@pytest.fixture(scope="session")
def ex21_oracle():
    return il.population_moments(il.make_example("ex2_1"))


@pytest.fixture(scope="session")
def ex21_instance(ex21_oracle):
    return LisInstance.hand_built(ex21_oracle.exact_moments())


@pytest.fixture(scope="session")
def ex22_instance():
    oracle = il.population_moments(il.make_example("ex2_2"))
    return LisInstance.hand_built(oracle.exact_moments())


def random_moment_set(rng, d=None, n_env=2, ridge=0.3):
    """Random well-conditioned multi-environment moments (float backend)."""
    d = d or int(rng.integers(2, 9))
    sigmas, us = [], []
    for _ in range(n_env):
        A = rng.standard_normal((2 * d, d))
        s = A.T @ A / (2 * d) + ridge * np.eye(d)
        sigmas.append(s)
        us.append(s @ rng.standard_normal(d) * 0.7)
    return il.EnvMomentSet.from_moments(sigmas, us, mean_sq_y=float(rng.uniform(1, 8)))
