"""
Classic one-dimensional TMLE for the average treatment effect.

Written without src.estimation: unnormalised clever covariate
H(A,W) = A/g(1|W) - (1-A)/(1-g(1|W)) and epsilon from the score root.
"""

import numpy as np
from scipy.optimize import brentq
from scipy.special import expit, logit


def _score(eps, y, offset, h):
    return float(np.sum(h * (y - expit(offset + eps * h))))


def _solve_epsilon(y, offset, h):
    lo, hi = -1.0, 1.0
    while _score(lo, y, offset, h) < 0:
        lo *= 2.0
    while _score(hi, y, offset, h) > 0:
        hi *= 2.0
    return brentq(_score, lo, hi, args=(y, offset, h), xtol=1e-15, maxiter=500)


def classic_ate_tmle(y, a, qbar0, qbar1, g1, q_bounds=(1e-5, 1 - 1e-5),
                     tol_scale=1.0, max_iter=100):
    """
    Iterate classic logistic fluctuations until |P_n D*| < tol_scale * sd / n.

    Returns:
        Dict with the estimate, the fitted epsilons and the final Q fits
    """
    y = np.asarray(y, dtype=float)
    a = np.asarray(a, dtype=float)
    q0 = np.asarray(qbar0, dtype=float)
    q1 = np.asarray(qbar1, dtype=float)
    g1 = np.asarray(g1, dtype=float)
    n = y.shape[0]
    h = a / g1 - (1 - a) / (1 - g1)
    epsilons = []

    for _ in range(max_iter + 1):
        qa = np.where(a == 1, q1, q0)
        eic = h * (y - qa) + (q1 - q0) - np.mean(q1 - q0)
        mean = np.mean(eic)
        if mean == 0 or abs(mean) < tol_scale * np.std(eic, ddof=1) / n:
            break
        if len(epsilons) == max_iter:
            break
        eps = _solve_epsilon(y, logit(qa), h)
        epsilons.append(eps)
        q1 = np.clip(expit(logit(q1) + eps / g1), *q_bounds)
        q0 = np.clip(expit(logit(q0) - eps / (1 - g1)), *q_bounds)

    return {
        'estimate': float(np.mean(q1 - q0)),
        'epsilons': epsilons,
        'qbar0': q0,
        'qbar1': q1,
    }
