"""Dense reference constructions used as independent test oracles."""
from math import comb

import numpy as np


def triud(A):
    return np.triu(A, k=1)


def dense_operator(X, s):
    """Materialize ``sum_d s_d triud(X_d X_d^T)``."""
    X = np.asarray(X, dtype=np.float64)
    return triud(X @ np.diag(s) @ X.T)


def dense_objective(X, y, s, coeffs, n=None):
    """Direct matrix-power evaluation of the estimator with exact binomials."""
    N = X.shape[0]
    n = N if n is None else n
    M = dense_operator(X, s)
    value = y @ y / N
    P = np.eye(N)
    for i, a in enumerate(coeffs):
        P = P @ M
        value -= a / comb(n, i + 2) * (y @ P @ y)
    return value


def brute_auc(scores, labels):
    pos = scores[labels > 0]
    neg = scores[labels <= 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (pos.size * neg.size)
