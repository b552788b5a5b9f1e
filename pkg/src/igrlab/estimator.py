"""Scikit-learn style estimator front end.

`IgrRegressor` wraps the moments -> weights -> penalized-solve chain behind
the usual fit/predict/get_params surface, so it composes with pipelines,
`clone`, and model selection utilities.  Environment labels arrive as a fit
parameter; without them the data is treated as a single environment and the
invariance penalty is inert.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import MultiEnvDataset
from .moments import moments_from_samples
from .solver import solve
from .weights import SQUARED, weight_table


class IgrRegressor(RegressorMixin, BaseEstimator):
    """Linear regression penalized by cross-environment prediction variation.

    Parameters
    ----------
    k : int
        Subset-search budget for the invariance weights.
    gamma : float
        Strength of the weighted (invariance) L1 penalty.
    lam : float
        Strength of the plain L1 penalty for high-dimensional problems.
    weight_convention : {"squared", "sqrt"}
        Scale on which the weight table is stored; the penalty itself always
        uses the square-root scale.
    normalize : bool
        Rescale columns to a unit pooled second moment before fitting
        (coefficients are reported on the original scale).
    center : bool
        Center each environment by its own means before computing moments;
        an intercept is fitted from the pooled means.
    tol, max_sweeps, kkt_tol : float, int, float
        Coordinate-descent stopping controls.
    """

    def __init__(
        self,
        k: int = 2,
        gamma: float = 1.0,
        lam: float = 0.0,
        weight_convention: str = SQUARED,
        normalize: bool = True,
        center: bool = True,
        tol: float = 1e-10,
        max_sweeps: int = 100_000,
        kkt_tol: float = 1e-6,
    ):
        self.k = k
        self.gamma = gamma
        self.lam = lam
        self.weight_convention = weight_convention
        self.normalize = normalize
        self.center = center
        self.tol = tol
        self.max_sweeps = max_sweeps
        self.kkt_tol = kkt_tol

    def fit(self, X, y, env=None):
        """Fit on rows grouped by environment label.

        Parameters
        ----------
        X, y : array-likes of shape (n, d) and (n,)
        env : array-like of shape (n,), optional
            Environment label per row; omitted means one environment.
        """
        X, y = check_X_y(X, y, y_numeric=True)
        if env is None:
            groups = [(X, y)]
            ids = ["e1"]
        else:
            env = np.asarray(env)
            if env.shape[0] != X.shape[0]:
                raise ValueError("env must have one label per row")
            ids = [str(v) for v in np.unique(env)]
            groups = [(X[env == v], y[env == v]) for v in np.unique(env)]
        data = MultiEnvDataset(groups, env_ids=ids)
        budget = min(self.k, data.d)
        m = moments_from_samples(data, normalize=self.normalize, center=self.center)
        wt = weight_table(m, budget, self.weight_convention)
        fit = solve(
            m, wt, self.gamma, self.lam,
            tol=self.tol, max_sweeps=self.max_sweeps, kkt_tol=self.kkt_tol,
        )
        beta = fit.beta / m.scaling if m.scaling is not None else fit.beta.copy()
        self.coef_ = beta
        if self.center:
            x_means = np.mean([mx for mx, _ in m.env_means], axis=0)
            y_mean = float(np.mean([my for _, my in m.env_means]))
            self.intercept_ = y_mean - float(x_means @ beta)
        else:
            self.intercept_ = 0.0
        self.weight_table_ = wt
        self.moments_ = m
        self.fit_result_ = fit
        self.n_features_in_ = data.d
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, expected {self.n_features_in_}"
            )
        return X @ self.coef_ + self.intercept_
