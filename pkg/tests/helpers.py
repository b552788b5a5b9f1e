"""Independent oracles used by the tests.

These stay deliberately separate from the package's own solvers: the
proximal-gradient solver below is the cross-check for coordinate descent,
and the matrix helpers lean on numpy instead of the package's elimination
code.
"""

import numpy as np


def fista_solve(sigma, u, penalties, iters=20000):
    """Accelerated proximal gradient for 0.5 b'Sb - b'u + sum p_j |b_j|."""
    sigma = np.asarray(sigma, dtype=float)
    u = np.asarray(u, dtype=float)
    p = np.asarray(penalties, dtype=float)
    d = u.shape[0]
    L = float(np.linalg.eigvalsh(sigma)[-1])
    beta = np.zeros(d)
    z = beta.copy()
    t = 1.0
    for _ in range(iters):
        g = sigma @ z - u
        w = z - g / L
        new = np.sign(w) * np.maximum(np.abs(w) - p / L, 0.0)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        z = new + ((t - 1) / t_new) * (new - beta)
        if (beta - new) @ (new - z) > 0:  # adaptive restart
            z = new
            t_new = 1.0
        beta, t = new, t_new
    return beta


def quadratic_objective(beta, sigma, u, penalties, mean_sq_y=0.0):
    beta = np.asarray(beta, dtype=float)
    return float(
        0.5 * beta @ sigma @ beta
        - beta @ u
        + 0.5 * mean_sq_y
        + np.asarray(penalties) @ np.abs(beta)
    )
