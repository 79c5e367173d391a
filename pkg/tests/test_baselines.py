import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.stats import f_oneway

from featgrad import baselines as B
from featgrad.dataio import Dataset


def test_anova_textbook_example():
    # x+ = {1, 2}, x- = {3, 4}: SSB = 4, SSW = 1, F = (4/1) / (1/2) = 8
    ds = Dataset(np.array([[1.0], [2.0], [3.0], [4.0]]), np.array([1, 1, -1, -1]))
    f = B.anova_f_scores(ds)
    assert f[0] == pytest.approx(8.0, rel=1e-12)
    assert f[0] == pytest.approx(f_oneway([1, 2], [3, 4]).statistic, rel=1e-10)


def test_anova_matches_scipy(rng):
    X = rng.normal(size=(50, 6))
    y = np.where(rng.uniform(size=50) > 0.4, 1, -1)
    X[y == 1, 2] += 1.0
    want = [f_oneway(X[y == 1, j], X[y == -1, j]).statistic for j in range(6)]
    np.testing.assert_allclose(B.anova_f_scores(Dataset(X, y)), want, rtol=1e-10)
    np.testing.assert_allclose(B.anova_f_scores(Dataset(sp.csr_matrix(X), y)), want, rtol=1e-8)


def test_anova_degenerate_rules():
    y = np.array([1, -1, 1, -1, 1])
    X = np.column_stack([y.astype(float), np.full(5, 3.0), np.arange(5.0)])
    f = B.anova_f_scores(Dataset(X, y))
    assert f[0] == math.inf and f[1] == 0.0 and np.isfinite(f[2])
    assert B.rank_scores(f)[0] == 0


def test_mutual_information_perfect_binary_feature():
    y = np.array([1, -1] * 10)
    X = np.column_stack([(y > 0).astype(float), np.full(20, 2.0)])
    mi = B.mutual_info_scores(Dataset(X, y))
    assert mi[0] == pytest.approx(math.log(2), rel=1e-12)
    assert mi[1] == 0.0


def _direct_mi(x, y, n_bins):
    lo, hi = x.min(), x.max()
    if hi == lo:
        return 0.0
    b = np.minimum(((x - lo) / (hi - lo) * n_bins).astype(int), n_bins - 1)
    total = 0.0
    for bi in range(n_bins):
        for c in (1, -1):
            p = np.mean((b == bi) & (y == c))
            if p > 0:
                total += p * math.log(p / (np.mean(b == bi) * np.mean(y == c)))
    return total


def test_mutual_information_matches_direct_count(rng):
    X = rng.normal(size=(300, 3))
    y = np.where(X[:, 0] + rng.normal(size=300) > 0, 1, -1)
    X_sparse = X.copy()
    X_sparse[X_sparse < 0] = 0
    for data in (X, X_sparse):
        mi = B.mutual_info_scores(Dataset(data, y), n_bins=16)
        want = [_direct_mi(data[:, j], y, 16) for j in range(3)]
        np.testing.assert_allclose(mi, want, rtol=1e-10, atol=1e-15)
    sparse_mi = B.mutual_info_scores(Dataset(sp.csr_matrix(X_sparse), y))
    np.testing.assert_allclose(sparse_mi, B.mutual_info_scores(Dataset(X_sparse, y)), rtol=1e-12)


def test_single_class_rejected():
    ds = Dataset(np.ones((3, 2)), np.ones(3, dtype=int))
    with pytest.raises(ValueError):
        B.anova_f_scores(ds)
    with pytest.raises(ValueError):
        B.mutual_info_scores(ds)


def test_rank_scores_tie_rule():
    assert B.rank_scores([0.9, 0.1, 0.5]).tolist() == [0, 2, 1]
    assert B.rank_scores([1, 1, 1, 1]).tolist() == [0, 1, 2, 3]
