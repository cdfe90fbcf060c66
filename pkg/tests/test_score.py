from __future__ import annotations

import math
import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gidag.equivalence import apply_step, enumerate_class, transform_sequence
from gidag.errors import DataError, HyperparameterError
from gidag.graph import Dag, is_acyclic_masks
from gidag.intervention import InterventionCollection
from gidag.mcmc import ChainState
from gidag.score import (
    Hyperparams,
    MultiEnvDataset,
    Score,
    ScoreCache,
    contexts_not_intervened,
    hyperparams_from_config,
    log_marginal_data,
    log_marginal_likelihood,
)
from gidag.simulate import simulate
from oracles import coll1, dag1, mc_log_marginal, random_state


def _data(q, K, n=50, seed=0):
    rng = np.random.default_rng(seed)
    return MultiEnvDataset([rng.standard_normal((n, q)) @ np.triu(rng.uniform(0.3, 1, (q, q))) for _ in range(K)])


def test_hyperparams_validation(tmp_path):
    with pytest.raises(HyperparameterError):
        Hyperparams(1.0, np.eye(3))
    with pytest.raises(HyperparameterError):
        Hyperparams(5.0, np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(HyperparameterError):
        Hyperparams(5.0, np.array([[1.0, 0.5], [0.4, 1.0]]))
    assert Hyperparams.default(4).a == 4.0
    (tmp_path / "U.csv").write_text("2,0\n0,2\n")
    h = hyperparams_from_config({"wishart_a": 3, "wishart_U": "U.csv"}, 2, base_dir=tmp_path)
    assert h.a == 3.0 and np.array_equal(h.U, 2 * np.eye(2))
    with pytest.raises(HyperparameterError):
        hyperparams_from_config({"wishart_U": "missing.csv"}, 2, base_dir=tmp_path)


def test_contexts_not_intervened_examples():
    I = coll1({3: []})
    assert contexts_not_intervened(I, 2) == {0}
    assert contexts_not_intervened(I, 0) == {0, 1}
    I3 = coll1({3: [1, 2]}, {4: [1, 2, 3]})
    assert contexts_not_intervened(I3, 3) == {0, 1}


def test_log_marginal_data_examples():
    h = Hyperparams.default(3)
    X = np.random.default_rng(0).standard_normal((7, 3))
    assert log_marginal_data(X, [], h) == 0.0
    assert log_marginal_data(np.zeros((0, 3)), [0, 2], h) == 0.0
    got = log_marginal_data(np.array([[2.0]]), [0], Hyperparams(1.0, np.eye(1)))
    assert abs(got - math.log(1 / (5 * math.pi))) < 1e-12


def test_log_marginal_data_matches_student_t_closed_form():
    # one column, one row: marginal is a Student-t with ``a`` degrees of freedom, scale sqrt(u / a)
    from scipy.stats import t

    for a, u, x in [(1.0, 1.0, 2.0), (3.0, 2.0, -0.7), (5.5, 0.4, 1.3)]:
        want = t.logpdf(x, df=a, scale=math.sqrt(u / a))
        assert abs(log_marginal_data(np.array([[x]]), [0], Hyperparams(a, np.array([[u]]))) - want) < 1e-12


def test_empty_dag_factorises():
    data = _data(2, 1)
    h = Hyperparams.default(2)
    X = data.blocks[0]
    want = log_marginal_data(X, [0], h) + log_marginal_data(X, [1], h)
    got = log_marginal_likelihood(Dag.empty(2), InterventionCollection.observational(1), data, h)
    assert abs(got - want) < 1e-12


def test_two_node_orientations_score_equal():
    data = _data(2, 1, seed=3)
    h = Hyperparams.default(2)
    I = InterventionCollection.observational(1)
    a = log_marginal_likelihood(dag1(2, (1, 2)), I, data, h)
    b = log_marginal_likelihood(dag1(2, (2, 1)), I, data, h)
    assert abs(a - b) < 1e-10


def test_fig5_pairs_score_equal_on_simulated_data():
    _, _, _, blocks = simulate(4, 2, 80, seed=4)
    data = MultiEnvDataset(blocks)
    h = Hyperparams.default(4)
    d = dag1(4, (1, 2), (1, 3), (2, 4), (3, 4))
    a = log_marginal_likelihood(d, coll1({1: [3], 3: []}), data, h)
    b = log_marginal_likelihood(d, coll1({1: [], 3: [1]}), data, h)
    assert abs(a - b) < 1e-8


def test_dimension_mismatch_rejected():
    with pytest.raises(DataError):
        Score(_data(3, 1), Hyperparams.default(2))
    with pytest.raises(DataError):
        MultiEnvDataset([np.zeros((3, 2)), np.zeros((3, 3))])


def test_empty_context_block_contributes_nothing():
    base = _data(3, 1, seed=8)
    with_empty = MultiEnvDataset(base.blocks + [np.zeros((0, 3))])
    h = Hyperparams.default(3)
    d = dag1(3, (1, 2), (2, 3))
    a = log_marginal_likelihood(d, InterventionCollection.observational(1), base, h)
    b = log_marginal_likelihood(d, coll1({2: []}), with_empty, h)
    # target 2 moves to an empty context; its term in context 1 covers the same rows
    c = log_marginal_likelihood(d, InterventionCollection.observational(2), with_empty, h)
    assert abs(a - c) < 1e-10
    assert abs(a - b) < 1e-10


# ---------------------------------------------------------------------------
# properties

def test_score_equivalence_random_pairs():
    rng = random.Random(2)
    cache = {}
    worst = 0.0
    for _ in range(120):
        q, K = rng.randint(2, 6), rng.randint(1, 3)
        if (q, K) not in cache:
            _, _, _, blocks = simulate(q, K, 60, seed=q * 10 + K)
            cache[q, K] = Score(MultiEnvDataset(blocks), Hyperparams.default(q))
        score = cache[q, K]
        p = random_state(rng, q, K, p_edge=0.6).to_pair()
        goal = rng.choice(enumerate_class(p).members)
        cur = p
        for step in transform_sequence(p, goal):
            cur = apply_step(cur, step)
        worst = max(worst, abs(score.total(p[0].pa, p[1]) - score.total(cur[0].pa, cur[1])))
    assert worst < 1e-8


def test_decomposability_term_by_term():
    rng = random.Random(3)
    _, _, _, blocks = simulate(5, 3, 40, seed=1)
    score = Score(MultiEnvDataset(blocks), Hyperparams.default(5))
    for _ in range(100):
        s1 = random_state(rng, 5, 3)
        s2 = random_state(rng, 5, 3)
        j = rng.randrange(5)
        # s3: s1 with node j's parent sets (in D and every context) taken from s2
        pa = list(s1.pa)
        pa[j] = s2.pa[j]
        T = list(s1.T)
        P = [list(p) for p in s1.P]
        for k in range(3):
            T[k] = (T[k] & ~(1 << j)) | (s2.T[k] & (1 << j))
            P[k][j] = s2.P[k][j]
        s3 = ChainState(pa, T, P)
        if not all(is_acyclic_masks(s3.post(k)) for k in range(3)):
            continue
        t1 = score.node_terms(s1.pa, s1.to_pair()[1])
        t3 = score.node_terms(s3.pa, s3.to_pair()[1])
        t2 = score.node_terms(s2.pa, s2.to_pair()[1])
        for i in range(5):
            assert t3[i] == (t2[i] if i == j else t1[i])


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6))
def test_cache_transparency(seed):
    rng = random.Random(seed)
    data = _data(4, 2, seed=seed % 17)
    h = Hyperparams.default(4)
    cache = ScoreCache()
    warm = Score(data, h, cache)
    for _ in range(5):
        p = random_state(rng, 4, 2).to_pair()
        cold = Score(data, h).total(p[0].pa, p[1])
        assert warm.total(p[0].pa, p[1]) == cold
        assert warm.total(p[0].pa, p[1]) == cold
    for (B, ctx), v in cache.table.items():
        fresh = Score(data, h).lmd(B, ctx)
        assert v == fresh


def test_monte_carlo_small():
    """Cheap version of the Monte-Carlo check; the acceptance suite uses 10^6 draws."""
    X = np.random.default_rng(0).standard_normal((5, 2))
    h = Hyperparams(3.0, np.array([[1.0, 0.3], [0.3, 1.5]]))
    est, se = mc_log_marginal(X, h.a, h.U, 100_000, np.random.default_rng(1))
    assert abs(est - log_marginal_data(X, [0, 1], h)) < 3 * se
