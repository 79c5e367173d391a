"""Relaxed subset search: Adam on ``f(sigmoid(2v)) + (lam/D) * sum sigmoid(2v)``."""
import csv
from dataclasses import dataclass, field
import logging
import math

import numpy as np
from scipy.special import expit

from featgrad import estimator
from featgrad.preprocess import transform_batch, transform_labels

log = logging.getLogger(__name__)

_S_MAX = np.nextafter(1.0, 0.0)
_S_MIN = np.finfo(np.float64).tiny


class NonFiniteGradientError(FloatingPointError):
    """Adam received a gradient containing NaN or inf."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Adam and loop settings.

    ``mini_batch_size=None`` trains full-batch on the fixed row order. With
    mini-batches, rows are reshuffled every epoch and micro-batches are
    accumulated until ``accumulation_target`` rows contribute to one step.
    ``epochs=None`` leaves only ``max_iterations`` and the tolerance test.
    """

    learning_rate: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_iterations: int = 1000
    rel_tolerance: float = 1e-5
    epochs: int = None
    mini_batch_size: int = None
    accumulation_target: int = 1000
    smoothing: float = 0.9
    seed: int = 0

    def __post_init__(self):
        for name in ("learning_rate", "adam_eps", "rel_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.mini_batch_size is not None and self.mini_batch_size < 1:
            raise ValueError("mini_batch_size must be >= 1")
        if self.accumulation_target < 1:
            raise ValueError("accumulation_target must be >= 1")
        if not 0 <= self.smoothing < 1:
            raise ValueError("smoothing must lie in [0, 1)")


@dataclass
class SelectionState:
    v: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    step: int = 0
    lam: float = 0.0
    trace: list = field(default_factory=list)
    stop_reason: str = ""

    @classmethod
    def initial(cls, n_features, lam=0.0):
        z = np.zeros(n_features)
        return cls(z.copy(), z.copy(), z.copy(), 0, float(lam))

    @property
    def scores(self):
        return squash(self.v)

    def save_checkpoint(self, path):
        np.savez(
            path,
            v=self.v,
            adam_m=self.adam_m,
            adam_v=self.adam_v,
            step=self.step,
            lam=self.lam,
            trace=np.asarray(self.trace, dtype=np.float64).reshape(-1, 4),
            stop_reason=np.array(self.stop_reason),
        )

    @classmethod
    def load_checkpoint(cls, path):
        with np.load(path) as z:
            trace = [(int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in z["trace"]]
            return cls(
                z["v"].copy(),
                z["adam_m"].copy(),
                z["adam_v"].copy(),
                int(z["step"]),
                float(z["lam"]),
                trace,
                str(z["stop_reason"]),
            )

    def write_trace(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["step", "objective", "penalty", "mean_s"])
            for step, obj, pen, mean_s in self.trace:
                w.writerow([step, repr(obj), repr(pen), repr(mean_s)])


def squash(v):
    """``sigmoid(2v)``, kept strictly inside (0, 1)."""
    s = expit(2.0 * np.asarray(v, dtype=np.float64))
    return np.clip(s, _S_MIN, _S_MAX)


def _squash_slope(v):
    # d sigmoid(2v) / dv = 2 sigmoid(2v) sigmoid(-2v), free of cancellation
    v = np.asarray(v, dtype=np.float64)
    return 2.0 * expit(2.0 * v) * expit(-2.0 * v)


def penalty_and_grad(v, lam, n_features=None):
    """Value and v-gradient of ``(lam/D) * sum_d sigmoid(2 v_d)``."""
    if lam < 0:
        raise ValueError(f"lambda must be nonnegative, got {lam}")
    v = np.asarray(v, dtype=np.float64)
    d = v.shape[0] if n_features is None else n_features
    if lam == 0:
        return 0.0, np.zeros_like(v)
    c = lam / d
    return float(c * expit(2.0 * v).sum()), c * _squash_slope(v)


def chain_gradient(grad_s, v):
    return np.asarray(grad_s, dtype=np.float64) * _squash_slope(v)


def adam_step(state, grad_v, cfg):
    """Apply one bias-corrected Adam update to ``state`` in place and return it."""
    grad_v = np.asarray(grad_v, dtype=np.float64)
    bad = ~np.isfinite(grad_v)
    if bad.any():
        idx = np.flatnonzero(bad)
        raise NonFiniteGradientError(
            f"non-finite gradient at step {state.step + 1}, coordinates {idx[:10].tolist()}"
            + (" ..." if idx.size > 10 else "")
        )
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    state.step += 1
    t = state.step
    state.adam_m = b1 * state.adam_m + (1.0 - b1) * grad_v
    state.adam_v = b2 * state.adam_v + (1.0 - b2) * grad_v * grad_v
    m_hat = state.adam_m / (1.0 - b1 ** t)
    v_hat = state.adam_v / (1.0 - b2 ** t)
    state.v = state.v - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.adam_eps)
    return state


def _micro_batches(n_rows, size, rng, min_rows):
    perm = rng.permutation(n_rows)
    for start in range(0, n_rows, size):
        idx = perm[start : start + size]
        if idx.size >= min_rows:
            yield idx


def _batch_view(train, rows, stats, center_labels):
    X = transform_batch(train.X if rows is None else train.X[rows], stats)
    y = train.y if rows is None else train.y[rows]
    return estimator.BatchView(X, transform_labels(y, stats, center=center_labels))


def fit(train, stats, est_cfg, opt_cfg, lam=0.0, state=None, center_labels=False):
    """Minimize the penalized relaxed objective over ``v`` and return the state.

    Each step averages micro-batch estimates weighted by row count; every
    micro-batch uses its own size in the binomial denominators. Stops on
    ``max_iterations``, the epoch budget, or a relative objective change below
    ``rel_tolerance`` (exponentially smoothed when training on mini-batches).
    """
    n, d = train.n_rows, train.n_features
    if n == 0:
        raise ValueError("empty training set")
    if stats.n_features != d:
        raise ValueError(f"stats fitted on {stats.n_features} features, data has {d}")
    k = est_cfg.order_k
    full_batch = opt_cfg.mini_batch_size is None or opt_cfg.mini_batch_size >= n
    if full_batch and n < k + 1:
        raise estimator.BatchTooSmallError(f"order {k} needs >= {k + 1} rows, have {n}")
    if not full_batch and opt_cfg.mini_batch_size < k + 1:
        raise estimator.BatchTooSmallError(
            f"mini_batch_size={opt_cfg.mini_batch_size} is below order+1={k + 1}"
        )
    if state is None:
        state = SelectionState.initial(d, lam)
    state.lam = float(lam)
    rng = np.random.default_rng(opt_cfg.seed)

    if full_batch:
        cached = _batch_view(train, None, stats, center_labels)

        def steps():
            epoch = 0
            while opt_cfg.epochs is None or epoch < opt_cfg.epochs:
                yield [cached]
                epoch += 1

    else:

        def steps():
            epoch = 0
            while opt_cfg.epochs is None or epoch < opt_cfg.epochs:
                group, rows = [], 0
                for idx in _micro_batches(n, opt_cfg.mini_batch_size, rng, k + 1):
                    group.append(idx)
                    rows += idx.size
                    if rows >= opt_cfg.accumulation_target:
                        yield [_batch_view(train, g, stats, center_labels) for g in group]
                        group, rows = [], 0
                if group:
                    yield [_batch_view(train, g, stats, center_labels) for g in group]
                epoch += 1

    prev = None
    smoothed = None
    state.stop_reason = "epochs"
    for batches in steps():
        s = squash(state.v)
        total_rows = 0
        obj = 0.0
        grad_s = np.zeros(d)
        for bv in batches:
            f_j, g_j = estimator.objective_and_gradient(bv, s, est_cfg)
            obj += bv.n_rows * f_j
            grad_s += bv.n_rows * g_j
            total_rows += bv.n_rows
        obj /= total_rows
        grad_s /= total_rows
        pen, pen_grad = penalty_and_grad(state.v, state.lam, d)
        total = obj + pen
        state.trace.append((state.step, obj, pen, float(s.mean())))

        if full_batch:
            current = total
        else:
            a = opt_cfg.smoothing
            smoothed = total if smoothed is None else a * smoothed + (1.0 - a) * total
            current = smoothed
        if prev is not None:
            rel = abs(current - prev) / max(abs(prev), 1e-12)
            if rel < opt_cfg.rel_tolerance:
                state.stop_reason = "tolerance"
                log.debug("stopping at step %d: relative change %.3g", state.step, rel)
                break
        prev = current
        if state.step >= opt_cfg.max_iterations:
            state.stop_reason = "max_iterations"
            break
        adam_step(state, chain_gradient(grad_s, state.v) + pen_grad, opt_cfg)
    return state
