"""Downstream evaluation: logistic regression per feature subset, AUC, paired t-test."""
import csv
from dataclasses import asdict, dataclass, field
import hashlib
import json
import math
from typing import NamedTuple
import time

import numpy as np
from scipy.special import expit, log_expit, stdtr
from scipy.stats import rankdata


@dataclass(frozen=True)
class LogRegConfig:
    mode: str = "batch"
    epochs: int = 5
    lr: float = None
    l2: float = 1e-6
    seed: int = 0
    max_iter: int = 5000
    tol: float = 1e-8
    batch_size: int = 32

    def __post_init__(self):
        if self.mode not in ("batch", "sgd"):
            raise ValueError(f"mode must be 'batch' or 'sgd', got {self.mode!r}")
        if self.l2 < 0:
            raise ValueError("l2 must be nonnegative")

    def digest(self):
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


class LogisticModel(NamedTuple):
    weights: np.ndarray
    bias: float
    loss: float

    def decision_function(self, X):
        return np.asarray(X @ self.weights).ravel() + self.bias


def _loss(Z, y, w, b, l2):
    margin = y * (Z @ w + b)
    return float(-log_expit(margin).mean() + 0.5 * l2 * (w @ w))


def _grad(Z, y, w, b, l2):
    margin = y * (Z @ w + b)
    r = -y * expit(-margin) / y.shape[0]
    return Z.T @ r + l2 * w, float(r.sum())


def fit_logreg(X, y, cfg=LogRegConfig()):
    """Fit ``P(y=+1|x) = sigmoid(w.x + b)`` on ±1 labels.

    Features are standardized internally for conditioning and the weights are
    mapped back to the original scale. Batch mode runs gradient descent with
    step ``1/L`` (``L`` the smoothness constant) unless ``cfg.lr`` is set.
    """
    X = X.toarray() if hasattr(X, "toarray") else np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError("empty subset: no features to fit")
    y = np.asarray(y, dtype=np.float64).ravel()
    if not (np.any(y > 0) and np.any(y < 0)):
        raise ValueError("logistic regression needs both classes in train")
    mu = X.mean(axis=0)
    sd = X.std(axis=0)
    sd[sd == 0] = 1.0
    Z = (X - mu) / sd
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0

    if cfg.mode == "batch":
        if cfg.lr is None:
            top = np.linalg.norm(Z, 2) ** 2 / n if d else 0.0
            step = 1.0 / (0.25 * (top + 1.0) + cfg.l2)
        else:
            step = cfg.lr
        loss = _loss(Z, y, w, b, cfg.l2)
        for _ in range(cfg.max_iter):
            gw, gb = _grad(Z, y, w, b, cfg.l2)
            w = w - step * gw
            b = b - step * gb
            new = _loss(Z, y, w, b, cfg.l2)
            if not math.isfinite(new):
                raise FloatingPointError("logistic loss became non-finite")
            done = abs(loss - new) < cfg.tol * max(abs(loss), 1e-12)
            loss = new
            if done:
                break
    else:
        rng = np.random.default_rng(cfg.seed)
        step = 0.1 if cfg.lr is None else cfg.lr
        for _ in range(cfg.epochs):
            perm = rng.permutation(n)
            for lo in range(0, n, cfg.batch_size):
                idx = perm[lo : lo + cfg.batch_size]
                gw, gb = _grad(Z[idx], y[idx], w, b, cfg.l2)
                w = w - step * gw
                b = b - step * gb
        loss = _loss(Z, y, w, b, cfg.l2)
        if not math.isfinite(loss):
            raise FloatingPointError("logistic loss became non-finite")

    weights = w / sd
    return LogisticModel(weights, float(b - weights @ mu), loss)


def auc(scores, labels):
    """Mann-Whitney AUC with ties counted one half, O(n log n)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel()
    pos = labels > 0
    n_pos = int(pos.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = rankdata(scores)  # average ranks over ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


class TTestResult(NamedTuple):
    statistic: float
    pvalue: float
    degenerate: bool


def paired_ttest(a, b):
    """Two-sided paired t-test on ``a - b``.

    Zero-variance differences are flagged degenerate; identical samples
    report ``p = 1``.
    """
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape or a.size < 2:
        raise ValueError("paired t-test needs two equal-length samples of size >= 2")
    diff = a - b
    n = diff.size
    sd = diff.std(ddof=1)
    mean = diff.mean()
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(0.0, 1.0, True)
        return TTestResult(math.copysign(math.inf, mean), 0.0, True)
    t = mean / (sd / math.sqrt(n))
    p = 2.0 * stdtr(n - 1, -abs(t))
    return TTestResult(float(t), float(min(p, 1.0)), False)


@dataclass
class EvalReport:
    selector: str
    sizes: list
    aucs: list
    seconds: list = field(default_factory=list)
    config_digest: str = ""

    def rows(self):
        for m, a, t in zip(self.sizes, self.aucs, self.seconds):
            yield self.selector, m, a, t

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["selector", "size", "auc", "seconds"])
            for sel, m, a, t in self.rows():
                w.writerow([sel, m, repr(a), f"{t:.6f}"])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            raise ValueError(f"{path}: no rows")
        return cls(
            rows[0]["selector"],
            [int(r["size"]) for r in rows],
            [float(r["auc"]) for r in rows],
            [float(r["seconds"]) for r in rows],
        )


def evaluate_selector(ranking, sizes, train, test, cfg=LogRegConfig(), selector="selector"):
    """Test AUC of a logistic model on the top-``m`` ranked features for each size."""
    ranking = np.asarray(ranking, dtype=np.int64)
    d = train.n_features
    sizes = sorted(set(int(m) for m in sizes))
    for m in sizes:
        if not 1 <= m <= d:
            raise ValueError(f"subset size {m} outside [1, {d}]")
    if ranking.size < sizes[-1]:
        raise ValueError(f"ranking has {ranking.size} entries, need {sizes[-1]}")
    report = EvalReport(selector, [], [], [], cfg.digest())
    for m in sizes:
        t0 = time.perf_counter()
        cols = ranking[:m]
        model = fit_logreg(train.X[:, cols], train.y, cfg)
        score = auc(model.decision_function(_columns(test.X, cols)), test.y)
        report.sizes.append(m)
        report.aucs.append(score)
        report.seconds.append(time.perf_counter() - t0)
    return report


def _columns(X, cols):
    sub = X[:, cols]
    return sub.toarray() if hasattr(sub, "toarray") else sub
