from fractions import Fraction
import math
import tracemalloc

import numpy as np
import pytest

from featgrad import estimator as E
from featgrad import kernels
from tests.oracles import dense_objective


def _batch(rng, n, d):
    X = rng.normal(size=(n, d))
    y = np.sign(rng.normal(size=n))
    return E.BatchView(X, y)


def test_config_defaults_and_validation():
    cfg = E.EstimatorConfig()
    assert cfg.order_k == 6
    assert cfg.coefficients == E.approximation_coefficients(6)
    assert E.EstimatorConfig(2, (1, 1)).coefficients == (1.0, 1.0)
    with pytest.raises(ValueError):
        E.EstimatorConfig(0)
    with pytest.raises(ValueError):
        E.EstimatorConfig(3, (1.0, 2.0))
    with pytest.raises(ValueError):
        E.EstimatorConfig(1, (float("nan"),))
    with pytest.raises(ValueError):
        E.EstimatorConfig(1, denominator_policy="approximate")


def test_approximation_coefficients_solve_normal_equations():
    # independent check: projection residual x - sum a_i x^{i+2} is orthogonal
    # to every basis monomial under the L2[0, 1] inner product
    for k in range(1, 7):
        a = E.approximation_coefficients(k)
        for j in range(k):
            # <x, x^{j+2}> - sum_i a_i <x^{i+2}, x^{j+2}>
            resid = 1.0 / (j + 4) - sum(ai / (i + j + 5) for i, ai in enumerate(a))
            assert abs(resid) < 1e-9 * max(abs(x) for x in a)
    assert E.approximation_coefficients(1) == (1.25,)
    assert E.approximation_coefficients(2) == pytest.approx((3.0, -2.1), rel=1e-15)
    with pytest.raises(ValueError):
        E.approximation_coefficients(0)


def test_approximation_coefficients_approximate_identity():
    grid = np.linspace(0, 1, 101)
    errs = []
    for k in (1, 2, 4, 6):
        a = E.approximation_coefficients(k)
        p = sum(ai * grid ** (i + 2) for i, ai in enumerate(a))
        errs.append(np.sqrt(np.mean((p - grid) ** 2)))
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_term_weights_policies_agree():
    for n in (7, 10, 1000, 10**6):
        cfg = E.EstimatorConfig(6, (1.0,) * 6)
        a = E.term_weights(cfg, n)
        b = E.term_weights(E.EstimatorConfig(6, (1.0,) * 6, "capped"), n)
        np.testing.assert_allclose(a, b, rtol=1e-10)
        assert a[0] == pytest.approx(1.0 / math.comb(n, 2), rel=1e-12)


def test_zero_weights_give_label_energy(rng):
    b = _batch(rng, 12, 3)
    assert E.objective(b, np.zeros(3), E.EstimatorConfig(4)) == b.y @ b.y / 12


def test_hand_example():
    b = E.BatchView(np.ones((3, 1)), np.ones(3))
    cfg = E.EstimatorConfig(1, (1.0,))
    np.testing.assert_allclose(E.series_terms(b, [1.0], 1), [3.0])
    assert E.objective(b, [1.0], cfg) == pytest.approx(0.0, abs=1e-15)


def test_batch_too_small():
    b = E.BatchView(np.ones((3, 2)), np.ones(3))
    with pytest.raises(E.BatchTooSmallError):
        E.objective(b, np.ones(2), E.EstimatorConfig(3))
    with pytest.raises(E.BatchTooSmallError):
        E.gradient(b, np.ones(2), E.EstimatorConfig(3))


def test_shape_errors(rng):
    with pytest.raises(ValueError):
        E.BatchView(np.ones((3, 2)), np.ones(4))
    b = _batch(rng, 5, 2)
    with pytest.raises(ValueError):
        E.objective(b, np.ones(3), E.EstimatorConfig(1))


@pytest.mark.parametrize("k", range(1, 7))
def test_objective_matches_dense_power_oracle(rng, k):
    b = _batch(rng, 30, 6)
    s = rng.uniform(size=6)
    cfg = E.EstimatorConfig(k)
    want = dense_objective(b.X, b.y, s, cfg.coefficients)
    assert E.objective(b, s, cfg) == pytest.approx(want, rel=1e-10)


def test_objective_uses_n_effective(rng):
    b = _batch(rng, 20, 3)
    s = rng.uniform(size=3)
    cfg = E.EstimatorConfig(3)
    b.n_effective = 50
    want = dense_objective(b.X, b.y, s, cfg.coefficients, n=50)
    assert E.objective(b, s, cfg) == pytest.approx(want, rel=1e-10)


def test_huge_n_denominators_stay_finite(rng):
    b = _batch(rng, 10, 2)
    b.n_effective = 10**9
    for policy in E.DENOMINATOR_POLICIES:
        f, g = E.objective_and_gradient(b, np.ones(2), E.EstimatorConfig(6, denominator_policy=policy))
        assert np.isfinite(f) and np.all(np.isfinite(g))


def _fd_gradient(b, s, cfg, h=1e-5):
    g = np.empty_like(s)
    for d in range(s.size):
        e = np.zeros_like(s)
        e[d] = h
        g[d] = (E.objective(b, s + e, cfg) - E.objective(b, s - e, cfg)) / (2 * h)
    return g


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    b = _batch(rng, 40, 8)
    s = rng.uniform(0.05, 0.95, size=8)
    cfg = E.EstimatorConfig(4)
    f, g = E.objective_and_gradient(b, s, cfg)
    assert f == pytest.approx(E.objective(b, s, cfg), rel=1e-14)
    fd = _fd_gradient(b, s, cfg)
    assert np.max(np.abs(g - fd)) <= 1e-5 * np.max(np.abs(fd))


@pytest.mark.parametrize("k", [1, 2, 5])
def test_fast_and_reference_gradient_agree(rng, k):
    b = _batch(rng, 25, 5)
    s = rng.uniform(size=5)
    cfg = E.EstimatorConfig(k)
    g = E.gradient(b, s, cfg)
    r = E.gradient_reference(b, s, cfg)
    assert np.max(np.abs(g - r)) <= 1e-12 * np.max(np.abs(r))


def test_absent_feature_has_zero_gradient(rng):
    b = _batch(rng, 15, 3)
    b.X[:, 1] = 0.0
    s = np.array([0.4, 0.0, 0.7])
    assert E.gradient(b, s, E.EstimatorConfig(3))[1] == 0.0


def test_series_terms_polynomial_degree(rng):
    # T_i(t * s) = t^{i+1} T_i(s)
    b = _batch(rng, 18, 4)
    s = rng.uniform(size=4)
    base = E.series_terms(b, s, 4)
    scaled = E.series_terms(b, 0.5 * s, 4)
    np.testing.assert_allclose(scaled, base * 0.5 ** np.arange(1, 5), rtol=1e-10)


def test_operator_auxiliary_memory_is_linear(rng):
    n, d, k = 4000, 50, 6
    X = np.ascontiguousarray(rng.normal(size=(n, d)))
    s = rng.uniform(size=d)
    v = rng.normal(size=n)
    E.operator_apply(X, s, v)  # warm caches and imports
    tracemalloc.start()
    tracemalloc.reset_peak()
    E.operator_apply(X, s, v)
    _, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    c = 8 if kernels.BACKEND == "cython" else 128
    assert peak <= c * (n * k + d) * 8
