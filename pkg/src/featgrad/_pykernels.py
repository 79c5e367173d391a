"""Blocked NumPy implementation of the estimator's hot loops.

Rows are processed in fixed-size blocks so the auxiliary footprint stays at
``O(BLOCK_ROWS * D + N)`` no matter how many rows the batch holds. Every pass
walks the blocks in a fixed order, so results are reproducible run to run.
"""
import numpy as np

BLOCK_ROWS = 32


def _rev_exclusive_cumsum(a):
    # out[i] = sum_{j>i} a[j] along axis 0
    out = np.empty_like(a)
    out[-1] = 0.0
    np.cumsum(a[:0:-1], axis=0, out=out[-2::-1])
    return out


def _fwd_exclusive_cumsum(a):
    # out[i] = sum_{j<i} a[j] along axis 0
    out = np.empty_like(a)
    out[0] = 0.0
    np.cumsum(a[:-1], axis=0, out=out[1:])
    return out


def operator_apply(X, s, v):
    """Return ``sum_d s[d] * triud(X[:, d] X[:, d]^T) @ v``."""
    n, d = X.shape
    out = np.empty(n)
    acc = np.zeros(d)  # sum over rows below the current block of X[j] * v[j]
    stop = n
    while stop > 0:
        start = max(0, stop - BLOCK_ROWS)
        xb = X[start:stop]
        p = xb * v[start:stop, None]
        c = _rev_exclusive_cumsum(p)
        c += acc
        c *= xb
        out[start:stop] = c @ s
        acc += p.sum(axis=0)
        stop = start
    return out


def operator_apply_transpose(X, s, v):
    """Return ``sum_d s[d] * triud(X[:, d] X[:, d]^T)^T @ v``."""
    n, d = X.shape
    out = np.empty(n)
    acc = np.zeros(d)
    for start in range(0, n, BLOCK_ROWS):
        stop = min(n, start + BLOCK_ROWS)
        xb = X[start:stop]
        p = xb * v[start:stop, None]
        c = _fwd_exclusive_cumsum(p)
        c += acc
        c *= xb
        out[start:stop] = c @ s
        acc += p.sum(axis=0)
    return out


def bilinear_accumulate(X, w, u, out):
    """Add ``w^T triud(X[:, d] X[:, d]^T) u`` to ``out[d]`` for every column d."""
    n, d = X.shape
    acc = np.zeros(d)
    stop = n
    while stop > 0:
        start = max(0, stop - BLOCK_ROWS)
        xb = X[start:stop]
        p = xb * u[start:stop, None]
        c = _rev_exclusive_cumsum(p)
        c += acc
        c *= xb
        out += w[start:stop] @ c
        acc += p.sum(axis=0)
        stop = start
    return out
