"""Residual-variance estimator over relaxed feature indicators.

For a normalized batch ``X`` (N x D), targets ``y`` and feature weights
``s`` the estimate is::

    f(s) = y.y / N - sum_{i<k} a_i / C(n, i+2) * y^T M(s)^{i+1} y
    M(s) = sum_d s_d triud(X[:, d] X[:, d]^T)

where ``triud`` keeps only the strictly upper triangle. ``M(s)`` is never
formed: one application costs O(ND) time through a running suffix sum per
feature, so the objective costs O(NDk) and needs O(Nk + D) extra memory.
"""
from dataclasses import dataclass, field
from fractions import Fraction
import math
import sys

import numpy as np

from featgrad import kernels


class BatchTooSmallError(ValueError):
    """The batch holds too few rows for the requested estimator order."""


DENOMINATOR_POLICIES = ("exact-binomial-log", "capped")


@dataclass(frozen=True)
class EstimatorConfig:
    """Order, polynomial coefficients and binomial-denominator policy.

    ``coefficients`` defaults to ``approximation_coefficients(order_k)``, the
    weights under which the series tracks explained variance on a normalized
    spectrum; pass ``(1.0,) * k`` for the plain unit series. ``denominator_policy`` selects how
    ``C(n, i+2)`` is evaluated: ``"exact-binomial-log"`` goes through
    log-gamma, ``"capped"`` uses exact integer binomials clipped to the
    largest finite double.
    """

    order_k: int = 6
    coefficients: tuple = None
    denominator_policy: str = "exact-binomial-log"

    def __post_init__(self):
        if int(self.order_k) < 1:
            raise ValueError(f"order_k must be >= 1, got {self.order_k}")
        coeffs = self.coefficients
        if coeffs is None:
            coeffs = approximation_coefficients(self.order_k)
        coeffs = tuple(float(a) for a in coeffs)
        if len(coeffs) != int(self.order_k):
            raise ValueError(
                f"expected {self.order_k} coefficients, got {len(coeffs)}"
            )
        if not all(math.isfinite(a) for a in coeffs):
            raise ValueError("coefficients must be finite")
        if self.denominator_policy not in DENOMINATOR_POLICIES:
            raise ValueError(f"unknown denominator_policy {self.denominator_policy!r}")
        object.__setattr__(self, "order_k", int(self.order_k))
        object.__setattr__(self, "coefficients", coeffs)


@dataclass
class BatchView:
    """A normalized dense batch. ``n_effective`` feeds the binomial denominators."""

    X: np.ndarray
    y: np.ndarray
    n_effective: int = field(default=None)

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=np.float64)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        if self.X.ndim != 2 or self.X.shape[0] != self.y.shape[0]:
            raise ValueError(
                f"X has shape {self.X.shape} but y has {self.y.shape[0]} entries"
            )
        if self.n_effective is None:
            self.n_effective = self.X.shape[0]

    @property
    def n_rows(self):
        return self.X.shape[0]


def approximation_coefficients(k):
    """Coefficients of the L2[0, 1] projection of ``x`` onto ``x^2 .. x^{k+1}``.

    Term ``i`` of the series estimates ``beta^T S^{i+2} beta`` for the
    normalized covariance ``S`` (spectrum in [0, 1]), so these weights make
    the series approximate the explained variance ``beta^T S beta``. Solved
    exactly in rationals; the Gram matrix is a Hilbert matrix.
    """
    k = int(k)
    if k < 1:
        raise ValueError("k must be >= 1")
    gram = [[Fraction(1, i + j + 5) for j in range(k)] + [Fraction(1, i + 4)] for i in range(k)]
    for col in range(k):
        pivot = gram[col][col]
        gram[col] = [x / pivot for x in gram[col]]
        for row in range(k):
            if row != col and gram[row][col] != 0:
                factor = gram[row][col]
                gram[row] = [a - factor * b for a, b in zip(gram[row], gram[col])]
    return tuple(float(gram[i][k]) for i in range(k))


def log_binomial(n, r):
    """``log C(n, r)``; a short sum of logs for small ``r``, log-gamma otherwise.

    The product form avoids the cancellation between large log-gamma values
    that costs about nine digits at ``n = 10**6``.
    """
    if not 0 <= r <= n:
        raise ValueError(f"C({n}, {r}) is zero")
    r = min(r, n - r)
    if r <= 64:
        return math.fsum(math.log(n - j) - math.log(j + 1) for j in range(r))
    return math.lgamma(n + 1) - math.lgamma(r + 1) - math.lgamma(n - r + 1)


def term_weights(cfg, n):
    """Return ``b_i = a_i / C(n, i+2)`` for ``i < k``."""
    if n < cfg.order_k + 1:
        raise BatchTooSmallError(f"C(n, {cfg.order_k + 1}) vanishes for n={n}")
    out = np.empty(cfg.order_k)
    for i, a in enumerate(cfg.coefficients):
        if cfg.denominator_policy == "capped":
            denom = min(float(math.comb(n, i + 2)), sys.float_info.max)
            out[i] = a / denom
        else:
            out[i] = a * math.exp(-log_binomial(n, i + 2))
    return out


def _rev_exclusive_cumsum(u):
    out = np.zeros_like(u)
    if u.size > 1:
        out[:-1] = np.cumsum(u[:0:-1])[::-1]
    return out


def triud_outer_apply(z, v):
    """``triud(z z^T) v`` in O(N): ``out[i] = z[i] * sum_{j>i} z[j] v[j]``."""
    z = np.asarray(z, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if z.shape != v.shape:
        raise ValueError("z and v must have equal lengths")
    return z * _rev_exclusive_cumsum(z * v)


def triud_outer_apply_transpose(z, v):
    """``triud(z z^T)^T v`` in O(N): ``out[i] = z[i] * sum_{j<i} z[j] v[j]``."""
    z = np.asarray(z, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if z.shape != v.shape:
        raise ValueError("z and v must have equal lengths")
    u = z * v
    prefix = np.zeros_like(u)
    if u.size > 1:
        prefix[1:] = np.cumsum(u[:-1])
    return z * prefix


def _matrix(batch):
    if isinstance(batch, BatchView):
        return batch.X
    return np.ascontiguousarray(batch, dtype=np.float64)


def _weights(s, n_features):
    s = np.ascontiguousarray(s, dtype=np.float64).ravel()
    if s.shape[0] != n_features:
        raise ValueError(f"s has length {s.shape[0]}, expected {n_features}")
    return s


def operator_apply(batch, s, v):
    """``M(s) v`` without forming the N x N operator."""
    X = _matrix(batch)
    return kernels.operator_apply(
        X, _weights(s, X.shape[1]), np.ascontiguousarray(v, dtype=np.float64)
    )


def operator_apply_transpose(batch, s, v):
    """``M(s)^T v`` without forming the N x N operator."""
    X = _matrix(batch)
    return kernels.operator_apply_transpose(
        X, _weights(s, X.shape[1]), np.ascontiguousarray(v, dtype=np.float64)
    )


def _check(batch, cfg):
    if batch.n_effective < cfg.order_k + 1:
        raise BatchTooSmallError(
            f"order {cfg.order_k} needs at least {cfg.order_k + 1} rows, "
            f"batch has n_effective={batch.n_effective}"
        )


def _right_vectors(batch, s, count):
    # u_0 = y, u_{m+1} = M u_m
    us = [batch.y]
    for _ in range(count - 1):
        us.append(kernels.operator_apply(batch.X, s, us[-1]))
    return us


def _left_vectors(batch, s, count):
    ws = [batch.y]
    for _ in range(count - 1):
        ws.append(kernels.operator_apply_transpose(batch.X, s, ws[-1]))
    return ws


def series_terms(batch, s, k):
    """Return ``T_i = y^T M(s)^{i+1} y`` for ``i < k``."""
    s = _weights(s, batch.X.shape[1])
    us = _right_vectors(batch, s, k + 1)
    return np.array([batch.y @ u for u in us[1:]])


def objective(batch, s, cfg):
    """Estimated residual variance at feature weights ``s``."""
    _check(batch, cfg)
    terms = series_terms(batch, s, cfg.order_k)
    b = term_weights(cfg, batch.n_effective)
    return float(batch.y @ batch.y / batch.n_rows - b @ terms)


def objective_and_gradient(batch, s, cfg):
    """Return ``(f(s), df/ds)`` in O(NDk) time.

    The double sum over term index and split point is folded into ``k``
    combined left vectors ``W_m = sum_j b_{j+m} w_j`` with ``w_j = (M^T)^j y``,
    so only one bilinear pass per right vector ``u_m = M^m y`` is needed.
    """
    _check(batch, cfg)
    X = batch.X
    s = _weights(s, X.shape[1])
    k = cfg.order_k
    b = term_weights(cfg, batch.n_effective)
    us = _right_vectors(batch, s, k + 1)
    ws = _left_vectors(batch, s, k)
    value = float(batch.y @ batch.y / batch.n_rows - sum(b[i] * (batch.y @ us[i + 1]) for i in range(k)))
    grad = np.zeros(X.shape[1])
    for m in range(k):
        W = b[m] * ws[0]
        for j in range(1, k - m):
            W = W + b[j + m] * ws[j]
        kernels.bilinear_accumulate(X, W, us[m], grad)
    grad = -grad
    return value, grad


def gradient(batch, s, cfg):
    return objective_and_gradient(batch, s, cfg)[1]


def gradient_reference(batch, s, cfg):
    """Unfolded O(NDk^2) form of the gradient, kept for cross-checks."""
    _check(batch, cfg)
    X = batch.X
    s = _weights(s, X.shape[1])
    k = cfg.order_k
    b = term_weights(cfg, batch.n_effective)
    us = _right_vectors(batch, s, k)
    ws = _left_vectors(batch, s, k)
    grad = np.zeros(X.shape[1])
    for i in range(k):
        part = np.zeros(X.shape[1])
        for j in range(i + 1):
            kernels.bilinear_accumulate(X, ws[j], us[i - j], part)
        grad -= b[i] * part
    return grad
