"""I-Markov equivalence of (DAG, intervention) pairs.

Two criteria are provided. ``i_markov_equivalent`` compares skeletons and
v-structures of the augmented graphs context by context. The semantic oracle
``semantic_equivalent_oracle`` instead lists every d-separation statement of
each post-intervention DAG and every separation of a vertex set from the
context vertex, and compares those lists directly. The second one is
exponential and only meant for small graphs in tests.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bits import iter_bits, subsets
from .errors import CapacityError, InvalidQueryError, NoEdgeError, NotEquivalentError, ValidityError
from .graph import (
    Dag,
    children_masks,
    is_acyclic_masks,
    reachable,
    skeleton_masks,
    topological_order_masks,
    v_structure_set,
)
from .intervention import (
    ContextIntervention,
    InterventionCollection,
    augmented_parent_masks,
    post_parent_masks,
)

Pair = tuple  # (Dag, InterventionCollection)

SEMANTIC_MAX_Q = 6
CLASS_CAP = 10**6


def _check_pair(p: Pair) -> tuple[Dag, InterventionCollection]:
    d, I = p
    for c in I:
        if not is_acyclic_masks(post_parent_masks(d.pa, c)):
            raise ValidityError(f"intervention in context {c.k} creates a cycle")
    return d, I


def _check_dims(p1: Pair, p2: Pair) -> None:
    if p1[0].q != p2[0].q or len(p1[1]) != len(p2[1]):
        raise InvalidQueryError("pairs differ in vertex count or number of contexts")


# ---------------------------------------------------------------------------
# graphical criterion

def graphical_signature(p: Pair) -> tuple:
    """Per-context skeleton and v-structures of the augmented graphs."""
    d, I = _check_pair(p)
    out = []
    for c in I:
        apa = augmented_parent_masks(d.pa, c)
        out.append((skeleton_masks(apa), v_structure_set(apa)))
    return tuple(out)


def i_markov_equivalent(p1: Pair, p2: Pair) -> bool:
    _check_dims(p1, p2)
    return graphical_signature(p1) == graphical_signature(p2)


# ---------------------------------------------------------------------------
# semantic oracle

def _dsep_table(pa: tuple[int, ...]) -> tuple[int, ...]:
    """For every disjoint (A, C) with A nonempty, the vertices d-connected to A given C.

    B is d-separated from A given C iff B avoids the stored mask, so the table
    encodes the complete list of d-separation statements of the graph.
    """
    q = len(pa)
    full = (1 << q) - 1
    ch = children_masks(pa)
    out = []
    for C in range(1 << q):
        for A in subsets(full & ~C):
            if A:
                out.append(reachable(pa, ch, A, C) & ~A)
    return tuple(out)


def _zeta_table(apa: tuple[int, ...]) -> tuple[int, ...]:
    """For every conditioning set C, the observed vertices d-connected to zeta."""
    q = len(apa) - 1
    ch = children_masks(apa)
    zbit = 1 << q
    return tuple(reachable(apa, ch, zbit, C) & ~zbit for C in range(1 << q))


class SemanticOracle:
    """Memoised statement tables; the same post-intervention DAGs recur a lot in sweeps."""

    def __init__(self):
        self._dsep: dict[tuple[int, ...], tuple[int, ...]] = {}
        self._zeta: dict[tuple[int, ...], tuple[int, ...]] = {}

    def signature(self, p: Pair) -> tuple:
        d, I = _check_pair(p)
        if d.q > SEMANTIC_MAX_Q:
            raise CapacityError(f"semantic oracle limited to q <= {SEMANTIC_MAX_Q}", d.q)
        out = []
        for c in I:
            pk = tuple(post_parent_masks(d.pa, c))
            t = self._dsep.get(pk)
            if t is None:
                t = self._dsep[pk] = _dsep_table(pk)
            apa = tuple(augmented_parent_masks(d.pa, c))
            z = self._zeta.get(apa)
            if z is None:
                z = self._zeta[apa] = _zeta_table(apa)
            out.append((t, z))
        return tuple(out)


def semantic_equivalent_oracle(p1: Pair, p2: Pair, oracle: SemanticOracle | None = None) -> bool:
    _check_dims(p1, p2)
    oracle = oracle or SemanticOracle()
    return oracle.signature(p1) == oracle.signature(p2)


# ---------------------------------------------------------------------------
# Find-Edge and transformation sequences

def find_edge_masks(pa1: Sequence[int], pa2: Sequence[int]) -> tuple[int, int]:
    if skeleton_masks(pa1) != skeleton_masks(pa2):
        raise InvalidQueryError("graphs have different skeletons")
    order = topological_order_masks(pa1)
    if order is None:
        raise InvalidQueryError("first graph is cyclic")
    pos = {j: i for i, j in enumerate(order)}
    for v in order:
        psi = [u for u in iter_bits(pa1[v]) if pa2[u] >> v & 1]
        if psi:
            return max(psi, key=pos.__getitem__), v
    raise NoEdgeError("graphs have no oppositely oriented edge")


def find_edge(d1: Dag, d2: Dag) -> tuple[int, int]:
    """Edge ``u -> v`` of ``d1`` that is reversed in ``d2``, chosen as in Chickering's procedure."""
    if d1.q != d2.q:
        raise InvalidQueryError("graphs differ in vertex count")
    return find_edge_masks(d1.pa, d2.pa)


def _covered(pa: Sequence[int], u: int, v: int) -> bool:
    return bool(pa[v] >> u & 1) and (pa[u] | 1 << u) == pa[v]


def _sim_covered(pa: Sequence[int], I: InterventionCollection, u: int, v: int) -> bool:
    if not _covered(pa, u, v):
        return False
    for c in I[1:]:
        tm = c.target_mask
        if tm >> u & 1 and tm >> v & 1:
            continue
        if not _covered(augmented_parent_masks(pa, c), u, v):
            return False
    return True


def _reverse_obs(pa: Sequence[int], u: int, v: int) -> tuple[int, ...]:
    out = list(pa)
    out[v] &= ~(1 << u)
    out[u] |= 1 << v
    return tuple(out)


def _reverse_ctx(c: ContextIntervention, u: int, v: int) -> ContextIntervention:
    m = c.mask_dict()
    m[v] &= ~(1 << u)
    m[u] |= 1 << v
    return ContextIntervention(c.k, m)


def _valid(pa: Sequence[int], I: InterventionCollection) -> bool:
    return all(is_acyclic_masks(post_parent_masks(pa, c)) for c in I)


def _moves(pa: tuple[int, ...], I: InterventionCollection, fixed_dag: bool = False):
    """Reversals keeping a pair inside its class: (scope, (u, v), new_pa, new_I)."""
    q = len(pa)
    for v in range(q if not fixed_dag else 0):
        for u in iter_bits(pa[v]):
            if _sim_covered(pa, I, u, v):
                npa = _reverse_obs(pa, u, v)
                if _valid(npa, I):
                    yield 0, (u, v), npa, I
    for c in I[1:]:
        tm = c.target_mask
        apa = augmented_parent_masks(pa, c)
        for v in iter_bits(tm):
            for u in iter_bits(apa[v] & tm):
                if _covered(apa, u, v):
                    nc = _reverse_ctx(c, u, v)
                    if is_acyclic_masks(post_parent_masks(pa, nc)):
                        yield c.k, (u, v), pa, I.replace(nc)


def _constructive_sequence(d1: Dag, I1: InterventionCollection, d2: Dag, I2: InterventionCollection):
    """Two-phase Find-Edge construction; returns None if a step would leave the class."""
    if not (_valid(d1.pa, I2) and _valid(d2.pa, I1) and _valid(d2.pa, I2)):
        return None
    seq = []
    pa = d1.pa
    I = I1
    for k in range(1, len(I)):
        goal = augmented_parent_masks(pa, I2[k])
        while True:
            cur = augmented_parent_masks(pa, I[k])
            try:
                u, v = find_edge_masks(cur, goal)
            except NoEdgeError:
                break
            tm = I[k].target_mask
            if not (tm >> u & 1 and tm >> v & 1 and _covered(cur, u, v)):
                return None
            nc = _reverse_ctx(I[k], u, v)
            if not is_acyclic_masks(post_parent_masks(pa, nc)):
                return None
            I = I.replace(nc)
            seq.append((k, (u, v)))
    if I != I2:
        return None
    while True:
        try:
            u, v = find_edge_masks(pa, d2.pa)
        except NoEdgeError:
            break
        if not _sim_covered(pa, I, u, v):
            return None
        pa = _reverse_obs(pa, u, v)
        if not _valid(pa, I):
            return None
        seq.append((0, (u, v)))
    return seq


def _search_sequence(d1: Dag, I1: InterventionCollection, d2: Dag, I2: InterventionCollection, cap: int):
    start = (d1.pa, I1)
    goal = (d2.pa, I2)
    prev = {start: None}
    queue = deque([start])
    while queue:
        state = queue.popleft()
        if state == goal:
            break
        for k, e, npa, nI in _moves(*state):
            nxt = (npa, nI)
            if nxt not in prev:
                prev[nxt] = (state, (k, e))
                if len(prev) > cap:
                    raise CapacityError("equivalence class too large to search", len(prev))
                queue.append(nxt)
    if goal not in prev:
        raise NotEquivalentError("no reversal sequence connects the two pairs")
    seq = []
    s = goal
    while prev[s] is not None:
        s, step = prev[s]
        seq.append(step)
    return seq[::-1]


def transform_sequence(p1: Pair, p2: Pair, cap: int = CLASS_CAP) -> list[tuple[int, tuple[int, int]]]:
    """Reversals turning ``p1`` into ``p2`` while staying in one equivalence class.

    Each step is ``(scope, (u, v))``. Scope 0 reverses ``u -> v`` in the DAG,
    which must be simultaneously covered; scope ``k >= 1`` reverses a covered
    edge between two targets of context ``k``, swapping its induced parents.
    The Find-Edge construction (interventions first, then the DAG) is used
    when both collections are valid for both DAGs; otherwise the shortest
    sequence is found by breadth-first search over the same moves.
    """
    _check_dims(p1, p2)
    d1, I1 = _check_pair(p1)
    d2, I2 = _check_pair(p2)
    if not i_markov_equivalent(p1, p2):
        raise NotEquivalentError("pairs are not I-Markov equivalent")
    seq = _constructive_sequence(d1, I1, d2, I2)
    if seq is None:
        seq = _search_sequence(d1, I1, d2, I2, cap)
    return seq


def apply_step(p: Pair, step: tuple[int, tuple[int, int]]) -> Pair:
    """Apply one ``(scope, (u, v))`` reversal from :func:`transform_sequence`."""
    d, I = p
    k, (u, v) = step
    if k == 0:
        return Dag(_reverse_obs(d.pa, u, v)), I
    return d, I.replace(_reverse_ctx(I[k], u, v))


# ---------------------------------------------------------------------------
# class enumeration

@dataclass
class EquivalenceClass:
    """Members of one class plus a per-context representative.

    ``representatives[k][u, v] = 1`` when ``u -> v`` appears in the context-k
    graph of some member; an edge is undirected when both entries are 1.
    """

    members: list = field(default_factory=list)
    representatives: list = field(default_factory=list)

    def __len__(self):
        return len(self.members)

    def __contains__(self, p):
        return any(p[0] == d and p[1] == I for d, I in self.members)


def enumerate_class(p: Pair, cap: int = CLASS_CAP, fixed_dag: bool = False) -> EquivalenceClass:
    """Breadth-first closure of ``p`` under class-preserving reversals.

    With ``fixed_dag`` only the induced parent sets move, giving the class of
    interventions equivalent to ``p[1]`` for the DAG ``p[0]``.
    """
    d, I = _check_pair(p)
    start = (d.pa, I)
    seen = {start}
    order = [start]
    queue = deque([start])
    while queue:
        state = queue.popleft()
        for _, _, npa, nI in _moves(*state, fixed_dag=fixed_dag):
            nxt = (npa, nI)
            if nxt not in seen:
                seen.add(nxt)
                if len(seen) > cap:
                    raise CapacityError("equivalence class exceeds the size cap", len(seen))
                order.append(nxt)
                queue.append(nxt)
    q = d.q
    reps = []
    for k in range(len(I)):
        rep = np.zeros((q, q), dtype=np.int8)
        for pa, J in order:
            for v, m in enumerate(post_parent_masks(pa, J[k])):
                for u in iter_bits(m):
                    rep[u, v] = 1
        reps.append(rep)
    return EquivalenceClass([(Dag(pa), J) for pa, J in order], reps)
