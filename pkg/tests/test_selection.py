import numpy as np
import pytest

from featgrad import dataio, optimizer as O, selection as S
from featgrad.estimator import EstimatorConfig


def test_ranking_examples():
    r = S.result_from_scores([0.9, 0.1, 0.5], "x", sizes=[2])
    assert r.ranking.tolist() == [0, 2, 1] and r.subsets == {2: [0, 2]}
    assert S.result_from_scores([0.3] * 4, "x").ranking.tolist() == [0, 1, 2, 3]


def test_rank_features_uses_v_beyond_score_saturation():
    st = O.SelectionState.initial(3)
    st.v[:] = [30.0, 40.0, -1.0]  # both squash to 1.0 in double precision
    r = S.rank_features(st, sizes=[1, 3])
    assert r.scores[0] == r.scores[1]
    assert r.ranking.tolist() == [1, 0, 2]
    assert r.subset(1).tolist() == [1]
    with pytest.raises(ValueError):
        r.subset(4)


def test_result_round_trip(tmp_path):
    r = S.result_from_scores([0.2, 0.8, 0.5], "anova", sizes=[1, 2])
    r.history = [(0.1, 0.7), (1.0, 0.8)]
    r.save(tmp_path / "sel.json")
    back = S.SelectionResult.load(tmp_path / "sel.json")
    assert back.ranking.tolist() == r.ranking.tolist()
    assert back.subsets == r.subsets and back.selector == "anova"
    np.testing.assert_array_equal(back.scores, r.scores)
    assert back.history == r.history
    r.write_subsets(tmp_path / "subsets.txt")
    assert (tmp_path / "subsets.txt").read_text() == "1: 1\n2: 1 2\n"


def test_scores_omitted_for_huge_d():
    r = S.result_from_scores(np.zeros(5), "x")
    assert "scores" in r.to_dict()
    assert "scores" not in r.to_dict(include_scores=False)


@pytest.fixture(scope="module")
def synthetic_split():
    ds, support = dataio.generate_synthetic(dataio.SynthSpec(600, 30, 4, seed=2))
    train, valid, _ = dataio.split(ds, dataio.SplitSpec(0.6, 0.2, 2))
    return train, valid, support


def test_grid_single_lambda(synthetic_split):
    train, valid, _ = synthetic_split
    lam, res = S.grid_search_lambda(train, valid, [0.3], [4], EstimatorConfig(2),
                                    O.OptimizerConfig(max_iterations=100))
    assert lam == 0.3 and res.lambda_used == 0.3 and len(res.history) == 1


def test_grid_prefers_moderate_lambda(synthetic_split):
    train, valid, support = synthetic_split
    lam, res = S.grid_search_lambda(train, valid, [1e6, 1.0, 1e6], [4], EstimatorConfig(2),
                                    O.OptimizerConfig(max_iterations=300))
    assert lam == 1.0
    assert [h[0] for h in res.history] == [1.0, 1e6]  # deduplicated, ascending
    assert res.history[0][1] >= res.history[1][1]
    assert set(res.ranking[:4]) == set(support)


def test_grid_failures(synthetic_split):
    train, valid, _ = synthetic_split
    with pytest.raises(S.SelectionError, match="lambda=-1"):
        S.grid_search_lambda(train, valid, [-1.0], [4], EstimatorConfig(2))
    with pytest.raises(ValueError):
        S.grid_search_lambda(train, valid, [], [4])
