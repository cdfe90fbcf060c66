from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from gidag.errors import InvalidQueryError, ValidityError
from gidag.graph import Dag, all_dags, is_covered
from gidag.intervention import (
    ContextIntervention,
    InterventionCollection,
    augment,
    context_interventions,
    enumerate_states,
    is_simultaneously_covered,
    is_valid,
    post_intervention_graph,
    recover_intervention,
)
from oracles import coll1, ctx1, dag1

FIG2 = dag1(4, (1, 2), (1, 3), (2, 4), (3, 4))


def edges1(adj):
    return {(int(u) + 1, int(v) + 1) for u, v in zip(*np.nonzero(adj))}


def _has_cycle_dfs(adj):
    # independent of the mask-based routine: colour-marking DFS
    q = len(adj)
    colour = [0] * q

    def visit(u):
        colour[u] = 1
        for v in range(q):
            if adj[u][v]:
                if colour[v] == 1 or (colour[v] == 0 and visit(v)):
                    return True
        colour[u] = 2
        return False

    return any(colour[u] == 0 and visit(u) for u in range(q))


def test_context_intervention_invariants():
    c = ctx1(2, {3: [2]})
    assert c.targets == {2}
    assert c.induced_parents == {2: {1}}
    with pytest.raises(InvalidQueryError):
        ctx1(2, {3: [3]})
    with pytest.raises(InvalidQueryError):
        ContextIntervention(0, {1: []})
    I = InterventionCollection.observational(3)
    assert I.K == 3 and all(not c.targets for c in I)
    with pytest.raises(InvalidQueryError):
        InterventionCollection([ContextIntervention(1)])


def test_post_intervention_graph_examples():
    g = post_intervention_graph(FIG2, ctx1(2, {3: [2]}))
    assert edges1(g) == {(1, 2), (2, 3), (2, 4), (3, 4)}
    g = post_intervention_graph(FIG2, ContextIntervention(1))
    assert np.array_equal(g, FIG2.adj)
    d3 = dag1(4, (1, 2), (3, 1), (2, 4), (3, 4))
    g = post_intervention_graph(d3, ctx1(2, {3: [2]}))
    assert {(2, 3), (3, 1), (1, 2)} <= edges1(g)
    assert _has_cycle_dfs(g)


def test_is_valid_examples():
    assert is_valid(FIG2, ctx1(2, {3: [2]}))
    d3 = dag1(4, (1, 2), (3, 1), (2, 4), (3, 4))
    assert not is_valid(d3, ctx1(2, {3: [2]}))
    for d in all_dags(3):
        assert is_valid(d, ContextIntervention(1))


def test_augment_examples():
    a = augment(FIG2, ctx1(2, {3: [1, 2]}))
    z = a.zeta
    assert set(a.dag.edges()) == {(0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (z, 2)}
    a = augment(FIG2, ctx1(3, {4: [1, 2, 3]}))
    assert set(a.dag.edges()) == {(0, 1), (0, 2), (0, 3), (1, 3), (2, 3), (a.zeta, 3)}
    a = augment(FIG2, ContextIntervention(0))
    assert set(a.dag.edges()) == set(FIG2.edges())
    assert not a.dag.children(a.zeta) and not a.dag.parents(a.zeta)
    with pytest.raises(ValidityError):
        augment(dag1(4, (1, 2), (3, 1), (2, 4), (3, 4)), ctx1(2, {3: [2]}))


def test_recover_examples():
    c = ctx1(2, {3: [2]})
    assert recover_intervention(FIG2, augment(FIG2, c)) == c
    assert recover_intervention(FIG2, augment(FIG2, ContextIntervention(1))).targets == frozenset()
    c3 = ctx1(3, {4: [1, 2, 3]})
    r = recover_intervention(FIG2, augment(FIG2, c3))
    assert r.targets == {3} and r.induced_parents[3] == {0, 1, 2}


def test_simultaneously_covered_examples():
    d = dag1(2, (1, 2))
    assert is_simultaneously_covered(d, InterventionCollection.observational(1), 0, 1) == is_covered(d, 0, 1)
    I = coll1({1: [3], 3: []})
    assert is_simultaneously_covered(FIG2, I, 0, 2)
    assert is_covered(FIG2, 0, 1)
    assert not is_simultaneously_covered(FIG2, I, 0, 1)


def test_enumerated_state_counts():
    assert sum(1 for _ in enumerate_states(2, 2)) == 22
    assert sum(1 for _ in enumerate_states(3, 2)) == 1466


@pytest.mark.parametrize("q", [1, 2, 3, 4])
def test_augment_recover_roundtrip_exhaustive(q):
    for d in all_dags(q):
        for c in context_interventions(d, 1):
            a = augment(d, c)
            assert a.targets == c.targets
            assert not a.dag.parents(a.zeta)
            assert recover_intervention(d, a) == c


@given(st.integers(2, 5), st.data())
def test_is_valid_matches_independent_cycle_check(q, data):
    d = Dag(data.draw(st.sampled_from(list(all_dags(min(q, 4))))).pa) if q <= 4 else dag1(5, (1, 2), (2, 3), (3, 4), (4, 5))
    q = d.q
    targets = data.draw(st.sets(st.integers(0, q - 1), max_size=q))
    induced = {j: data.draw(st.sets(st.sampled_from([i for i in range(q) if i != j]))) for j in targets}
    c = ContextIntervention(1, induced)
    assert is_valid(d, c) == (not _has_cycle_dfs(post_intervention_graph(d, c)))


def test_context_interventions_match_filtered_product():
    d = dag1(3, (1, 2))
    got = set(context_interventions(d, 1))
    want = set()
    others = {j: [i for i in range(3) if i != j] for j in range(3)}
    for r in range(4):
        for T in itertools.combinations(range(3), r):
            pools = [[m for n in range(3) for m in itertools.combinations(others[j], n)] for j in T]
            for ps in itertools.product(*pools):
                c = ContextIntervention(1, dict(zip(T, ps)))
                if not _has_cycle_dfs(post_intervention_graph(d, c)):
                    want.add(c)
    assert got == want
