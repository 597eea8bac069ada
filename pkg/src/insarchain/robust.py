"""Tukey-biweight iteratively reweighted least squares."""

import numpy as np

TUKEY_C = 4.685
MAD_TO_SIGMA = 0.6745


def mad_scale(resid, axis=None):
    """Robust residual scale, median(|r|) / 0.6745 (residuals are centred on zero)."""
    return np.median(np.abs(resid), axis=axis) / MAD_TO_SIGMA


def tukey(u):
    """Biweight: (1 - u^2)^2 for |u| < 1, else 0."""
    u = np.asarray(u, dtype=float)
    return np.where(np.abs(u) < 1.0, (1.0 - u * u) ** 2, 0.0)


def robust_lstsq(X, y, prior=None, c=TUKEY_C, max_iter=50, tol=1e-8):
    """Fit ``y ~ X @ beta`` with biweight reweighting.

    Starts from (prior-)weighted least squares and stops once no coefficient
    moves by more than ``tol`` or after ``max_iter`` reweightings.
    Returns (beta, weights, n_iter).
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    prior = np.ones(len(y)) if prior is None else np.asarray(prior, dtype=float)
    floor = 1e-12 * max(1.0, float(np.max(np.abs(y), initial=0.0)))
    w = prior.copy()
    beta = _wls(X, y, w)
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        r = y - X @ beta
        s = max(mad_scale(r[prior > 0]) if np.any(prior > 0) else 0.0, floor)
        w = prior * tukey(r / (c * s))
        new = _wls(X, y, w)
        step = np.max(np.abs(new - beta)) if len(beta) else 0.0
        beta = new
        if step < tol:
            break
    return beta, w, n_iter


def _wls(X, y, w):
    sw = np.sqrt(w)
    return np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)[0]
