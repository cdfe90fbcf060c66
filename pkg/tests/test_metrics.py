from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gidag.errors import InvalidQueryError
from gidag.mcmc import ChainOutput, ChainState, state_indicators
from gidag.metrics import diff_graph_errors, evaluate, shd, target_errors, true_difference_graphs
from gidag.posterior import summarize
from gidag.simulate import gen_truth
from oracles import dag1


def test_shd_examples():
    a = dag1(3, (1, 2), (2, 3)).adj
    assert shd(a, a) == 0
    assert shd(a, dag1(3, (1, 2), (2, 3), (1, 3)).adj) == 1
    assert shd(a, dag1(3, (2, 1), (2, 3)).adj) == 1
    und = a.copy()
    und[1, 0] = 1
    assert shd(a, und) == 1
    with pytest.raises(InvalidQueryError):
        shd(np.zeros((2, 2)), np.zeros((3, 3)))


def test_target_error_examples():
    assert target_errors([[], [1, 2]], [[], [1, 2]]) == 0
    assert target_errors([[], [1, 2]], [[], [1, 3]]) == 2
    assert target_errors([[], [0, 1]], [[], [2, 3, 4]]) == 5


def test_diff_graph_error_examples():
    G = np.zeros((3, 3), dtype=int)
    G[0, 1] = 1
    assert diff_graph_errors(G, G) == 0
    H = G.copy()
    H[0, 1], H[2, 1] = 0, 1
    assert diff_graph_errors(G, H) == 2
    A = np.zeros((3, 3), dtype=int)
    A[0, 1] = A[0, 2] = 1
    B = np.zeros((3, 3), dtype=int)
    B[1, 0] = B[2, 0] = B[2, 1] = 1
    assert diff_graph_errors(A, B) == 5


@given(st.data())
def test_shd_is_a_metric(data):
    q = data.draw(st.integers(2, 5))
    mats = [np.array(data.draw(st.lists(st.lists(st.integers(0, 1), min_size=q, max_size=q), min_size=q, max_size=q)))
            for _ in range(3)]
    for m in mats:
        np.fill_diagonal(m, 0)
    a, b, c = mats
    assert shd(a, b) == shd(b, a) >= 0
    assert (shd(a, b) == 0) == np.array_equal(a, b)
    assert shd(a, c) <= shd(a, b) + shd(b, c)


def _point_summary(d, I):
    e, t, g = state_indicators(ChainState.from_pair(d, I))
    q, K = d.q, len(I)
    return summarize(ChainOutput(q=q, K=K, S=1, burn_in=0, thin=1, seed=0, n_eff=1,
                                 edge_counts=e, target_counts=t, diff_counts=g, accepted=[0] * K, proposed=[0] * K))


def test_evaluate_perfect_estimate_scores_zero():
    for seed in range(30):
        d, I, _ = gen_truth(6, 3, seed)
        rep = evaluate((d, I), _point_summary(d, I))
        assert rep.shd == [0, 0, 0]
        assert rep.total_target_errors == 0 and rep.total_diff_errors == 0
        assert rep.estimate_is_class_member
        assert set(rep.to_dict()) >= {"shd", "shd_obs", "target_errors", "diff_errors"}


def test_evaluate_counts_wrong_target():
    d, I, _ = gen_truth(5, 2, 1)
    other = gen_truth(5, 2, 2)
    rep = evaluate((d, I), _point_summary(*other[:2]))
    assert min(rep.shd + rep.target_errors + rep.diff_errors) >= 0
    assert len(true_difference_graphs(d, I)) == 2
