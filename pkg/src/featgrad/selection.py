"""Turning trained relaxations into ranked subsets; choosing lambda on validation data."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import json
import logging

import numpy as np

from featgrad import optimizer
from featgrad.estimator import EstimatorConfig
from featgrad.evaluation import LogRegConfig, evaluate_selector
from featgrad.preprocess import fit_stats

log = logging.getLogger(__name__)

DEFAULT_LAMBDA_GRID = (0.01, 0.1, 1.0, 10.0)
SCORES_OMIT_ABOVE = 100_000


class SelectionError(RuntimeError):
    """Every candidate lambda failed to produce a usable selection."""


@dataclass
class SelectionResult:
    scores: np.ndarray
    ranking: np.ndarray
    subsets: dict = field(default_factory=dict)
    lambda_used: float = None
    selector: str = "fg"
    history: list = field(default_factory=list)

    @property
    def n_features(self):
        return int(self.ranking.size)

    def subset(self, m):
        if not 0 <= m <= self.n_features:
            raise ValueError(f"subset size {m} outside [0, {self.n_features}]")
        return self.ranking[:m].copy()

    def with_sizes(self, sizes):
        self.subsets = {int(m): self.subset(int(m)).tolist() for m in sorted(set(sizes))}
        return self

    def to_dict(self, include_scores=None):
        if include_scores is None:
            include_scores = self.n_features <= SCORES_OMIT_ABOVE
        out = {
            "selector": self.selector,
            "n_features": self.n_features,
            "lambda": self.lambda_used,
            "ranking": self.ranking.tolist(),
            "subsets": {str(m): idx for m, idx in self.subsets.items()},
        }
        if self.history:
            out["history"] = [[lam, auc] for lam, auc in self.history]
        if include_scores:
            out["scores"] = [float(s) for s in self.scores]
        return out

    def save(self, path, include_scores=None):
        with open(path, "w") as fh:
            json.dump(self.to_dict(include_scores), fh, indent=1)
            fh.write("\n")

    def write_subsets(self, path):
        with open(path, "w") as fh:
            for m, idx in self.subsets.items():
                fh.write(f"{m}: {' '.join(str(i) for i in idx)}\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        ranking = np.asarray(d["ranking"], dtype=np.int64)
        scores = np.asarray(d.get("scores", []), dtype=np.float64)
        subsets = {int(m): idx for m, idx in d.get("subsets", {}).items()}
        history = [tuple(h) for h in d.get("history", [])]
        return cls(scores, ranking, subsets, d.get("lambda"), d.get("selector", "fg"), history)


def rank_features(state, sizes=()):
    """Rank features by descending learned score, ties to the lower index.

    The order is computed on ``v`` itself: ``sigmoid(2v)`` is strictly
    increasing, so the order is the same, but ``v`` stays resolved where the
    score rounds to 1.0 in floating point.
    """
    v = np.asarray(state.v, dtype=np.float64)
    ranking = np.lexsort((np.arange(v.size), -v))
    result = SelectionResult(optimizer.squash(v), ranking, lambda_used=state.lam)
    return result.with_sizes(sizes)


def result_from_scores(scores, selector, sizes=()):
    """Wrap filter scores into the shared ranked-list format."""
    scores = np.asarray(scores, dtype=np.float64)
    ranking = np.lexsort((np.arange(scores.size), -scores))
    return SelectionResult(scores, ranking, selector=selector).with_sizes(sizes)


def grid_search_lambda(
    train,
    validation,
    lambdas=DEFAULT_LAMBDA_GRID,
    target_sizes=(10,),
    est_cfg=None,
    opt_cfg=None,
    stats=None,
    logreg_cfg=LogRegConfig(),
    n_jobs=1,
):
    """Fit once per lambda and keep the one with the best mean validation AUC.

    Ties go to the smaller lambda. Returns ``(best_lambda, SelectionResult)``;
    the result's ``history`` lists ``(lambda, mean AUC)`` for every fit.
    """
    est_cfg = est_cfg or EstimatorConfig()
    opt_cfg = opt_cfg or optimizer.OptimizerConfig()
    grid = sorted(set(float(lam) for lam in lambdas))
    if not grid:
        raise ValueError("lambda grid is empty")
    if validation.n_rows == 0:
        raise ValueError("validation set is empty")
    sizes = sorted(set(int(m) for m in target_sizes))
    if stats is None:
        stats = fit_stats(train, seed=opt_cfg.seed)

    def run(lam):
        try:
            state = optimizer.fit(train, stats, est_cfg, opt_cfg, lam)
            result = rank_features(state, sizes)
            report = evaluate_selector(result.ranking, sizes, train, validation, logreg_cfg, "fg")
            score = float(np.mean(report.aucs))
            if not np.isfinite(score):
                raise FloatingPointError("validation AUC is not finite")
            return lam, result, score, ""
        except (ArithmeticError, ValueError) as exc:
            return lam, None, float("nan"), f"{type(exc).__name__}: {exc}"

    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            outcomes = list(pool.map(run, grid))
    else:
        outcomes = [run(lam) for lam in grid]

    best = None
    history = []
    for lam, result, score, err in outcomes:
        history.append((lam, score))
        log.info("lambda=%g mean validation AUC=%s %s", lam, score, err)
        if result is not None and (best is None or score > best[2]):
            best = (lam, result, score)
    if best is None:
        detail = "; ".join(f"lambda={lam}: {err}" for lam, _, _, err in outcomes)
        raise SelectionError(f"all lambda fits failed: {detail}")
    lam, result, _ = best
    result.history = history
    return lam, result
