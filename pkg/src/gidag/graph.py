"""DAG representation and observational graph predicates.

Vertices are 0-based integers. Internally every vertex set is an int bitmask;
a graph is a tuple ``pa`` where ``pa[j]`` is the parent mask of vertex ``j``.
The mask-level helpers (``topological_order_masks``, ``descendant_masks``,
``reachable``) are what the sampler uses on its hot path; the :class:`Dag`
class wraps them with a friendlier set-based interface.
"""
from __future__ import annotations

from itertools import product
from typing import Iterable, Iterator, Sequence

import numpy as np

from .bits import iter_bits, to_mask, to_set
from .errors import InvalidQueryError, MalformedGraphError


# ---------------------------------------------------------------------------
# mask-level helpers

def children_masks(pa: Sequence[int]) -> list[int]:
    ch = [0] * len(pa)
    for j, m in enumerate(pa):
        bit = 1 << j
        while m:
            low = m & -m
            ch[low.bit_length() - 1] |= bit
            m ^= low
    return ch


def topological_order_masks(pa: Sequence[int]) -> list[int] | None:
    """Kahn elimination, ties broken by ascending vertex index.

    Returns ``None`` when the parent masks contain a directed cycle.
    """
    remaining = (1 << len(pa)) - 1
    order = []
    while remaining:
        m = remaining
        while m:
            low = m & -m
            j = low.bit_length() - 1
            if not pa[j] & remaining:
                break
            m ^= low
        else:
            return None
        order.append(j)
        remaining ^= 1 << j
    return order


def is_acyclic_masks(pa: Sequence[int]) -> bool:
    # Repeatedly strip sinks/sources; cheaper than building the full order.
    remaining = (1 << len(pa)) - 1
    while remaining:
        removed = 0
        m = remaining
        while m:
            low = m & -m
            if not pa[low.bit_length() - 1] & remaining:
                removed |= low
            m ^= low
        if not removed:
            return False
        remaining &= ~removed
    return True


def descendant_masks(pa: Sequence[int], order: Sequence[int] | None = None) -> list[int]:
    """``desc[j]`` = strict descendants of ``j``. ``pa`` must be acyclic."""
    if order is None:
        order = topological_order_masks(pa)
        if order is None:
            raise MalformedGraphError("graph has a directed cycle")
    ch = children_masks(pa)
    desc = [0] * len(pa)
    for j in reversed(order):
        d = 0
        m = ch[j]
        while m:
            low = m & -m
            d |= low | desc[low.bit_length() - 1]
            m ^= low
        desc[j] = d
    return desc


def ancestor_mask(pa: Sequence[int], mask: int) -> int:
    """``mask`` together with all of its ancestors."""
    anc = mask
    frontier = mask
    while frontier:
        new = 0
        for j in iter_bits(frontier):
            new |= pa[j]
        frontier = new & ~anc
        anc |= new
    return anc


def reachable(pa: Sequence[int], ch: Sequence[int], sources: int, given: int) -> int:
    """Vertices d-connected to ``sources`` given ``given`` (Bayes-ball).

    Traverses (vertex, direction) states: ``up`` means the vertex was entered
    from one of its children, ``down`` from one of its parents. A collider is
    passable only when it has a descendant in ``given``, i.e. when it is an
    ancestor-or-self of ``given``. The result excludes ``given`` and includes
    the sources themselves.
    """
    anc = ancestor_mask(pa, given)
    up_seen = 0
    down_seen = 0
    up_todo = sources
    down_todo = 0
    reach = 0
    while up_todo or down_todo:
        if up_todo:
            low = up_todo & -up_todo
            up_todo ^= low
            if up_seen & low:
                continue
            up_seen |= low
            y = low.bit_length() - 1
            if given & low:
                continue
            reach |= low
            up_todo |= pa[y] & ~up_seen
            down_todo |= ch[y] & ~down_seen
        else:
            low = down_todo & -down_todo
            down_todo ^= low
            if down_seen & low:
                continue
            down_seen |= low
            y = low.bit_length() - 1
            if not given & low:
                reach |= low
                down_todo |= ch[y] & ~down_seen
            if anc & low:
                up_todo |= pa[y] & ~up_seen
    return reach


def parent_masks_from_adjacency(adj) -> tuple[int, ...]:
    a = np.asarray(adj)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MalformedGraphError(f"adjacency must be square, got shape {a.shape}")
    if not np.all((a == 0) | (a == 1)):
        raise MalformedGraphError("adjacency must be binary")
    if np.any(np.diag(a) != 0):
        raise MalformedGraphError("adjacency has a nonzero diagonal (self-loop)")
    q = a.shape[0]
    return tuple(to_mask(int(i) for i in np.flatnonzero(a[:, j])) for j in range(q))


def adjacency_from_parent_masks(pa: Sequence[int]) -> np.ndarray:
    q = len(pa)
    a = np.zeros((q, q), dtype=np.int8)
    for j, m in enumerate(pa):
        for i in iter_bits(m):
            a[i, j] = 1
    return a


# ---------------------------------------------------------------------------

class Dag:
    """Immutable DAG on vertices ``0..q-1``.

    Parameters
    ----------
    pa:
        Parent bitmask of every vertex.
    """

    __slots__ = ("pa", "_order", "_ch")

    def __init__(self, pa: Iterable[int]):
        pa = tuple(int(m) for m in pa)
        q = len(pa)
        if q < 1:
            raise MalformedGraphError("a DAG needs at least one vertex")
        full = (1 << q) - 1
        for j, m in enumerate(pa):
            if m & ~full or m < 0:
                raise MalformedGraphError(f"parent mask of vertex {j} out of range")
            if m >> j & 1:
                raise MalformedGraphError(f"self-loop at vertex {j}")
        order = topological_order_masks(pa)
        if order is None:
            raise MalformedGraphError("graph has a directed cycle")
        object.__setattr__(self, "pa", pa)
        object.__setattr__(self, "_order", tuple(order))
        object.__setattr__(self, "_ch", None)

    def __setattr__(self, name, value):
        raise AttributeError("Dag is immutable")

    # construction -------------------------------------------------------
    @classmethod
    def empty(cls, q: int) -> "Dag":
        return cls([0] * q)

    @classmethod
    def from_adjacency(cls, adj) -> "Dag":
        return cls(parent_masks_from_adjacency(adj))

    @classmethod
    def from_edges(cls, q: int, edges: Iterable[tuple[int, int]]) -> "Dag":
        pa = [0] * q
        for u, v in edges:
            if not (0 <= u < q and 0 <= v < q):
                raise MalformedGraphError(f"edge ({u}, {v}) out of range for q={q}")
            pa[v] |= 1 << u
        return cls(pa)

    # basic accessors ----------------------------------------------------
    @property
    def q(self) -> int:
        return len(self.pa)

    @property
    def adj(self) -> np.ndarray:
        return adjacency_from_parent_masks(self.pa)

    @property
    def ch(self) -> tuple[int, ...]:
        if self._ch is None:
            object.__setattr__(self, "_ch", tuple(children_masks(self.pa)))
        return self._ch

    def edges(self) -> list[tuple[int, int]]:
        return sorted((i, j) for j, m in enumerate(self.pa) for i in iter_bits(m))

    @property
    def n_edges(self) -> int:
        return sum(m.bit_count() for m in self.pa)

    def has_edge(self, u: int, v: int) -> bool:
        return bool(self.pa[v] >> u & 1)

    def adjacent(self, u: int, v: int) -> bool:
        return self.has_edge(u, v) or self.has_edge(v, u)

    def _check_vertex(self, j: int) -> None:
        if not 0 <= j < self.q:
            raise InvalidQueryError(f"vertex {j} out of range for q={self.q}")

    def parents(self, j: int) -> frozenset[int]:
        self._check_vertex(j)
        return to_set(self.pa[j])

    def family(self, j: int) -> frozenset[int]:
        self._check_vertex(j)
        return to_set(self.pa[j] | 1 << j)

    def children(self, j: int) -> frozenset[int]:
        self._check_vertex(j)
        return to_set(self.ch[j])

    def topological_order(self) -> list[int]:
        return list(self._order)

    def descendants(self) -> list[int]:
        """Strict-descendant masks for all vertices."""
        return descendant_masks(self.pa, self._order)

    # edits (return new graphs; raise on cycles) -------------------------
    def add_edge(self, u: int, v: int) -> "Dag":
        pa = list(self.pa)
        pa[v] |= 1 << u
        return Dag(pa)

    def remove_edge(self, u: int, v: int) -> "Dag":
        pa = list(self.pa)
        pa[v] &= ~(1 << u)
        return Dag(pa)

    def reverse_edge(self, u: int, v: int) -> "Dag":
        if not self.has_edge(u, v):
            raise InvalidQueryError(f"edge {u}->{v} not in graph")
        pa = list(self.pa)
        pa[v] &= ~(1 << u)
        pa[u] |= 1 << v
        return Dag(pa)

    # dunder -------------------------------------------------------------
    def __eq__(self, other):
        return isinstance(other, Dag) and self.pa == other.pa

    def __hash__(self):
        return hash(self.pa)

    def __repr__(self):
        return f"Dag(q={self.q}, edges={self.edges()})"


# ---------------------------------------------------------------------------
# set-level predicates

def is_acyclic(adj) -> bool:
    """True iff the square binary matrix ``adj`` has no directed cycle."""
    return is_acyclic_masks(parent_masks_from_adjacency(adj))


def topological_sort(d: Dag) -> list[int]:
    return d.topological_order()


def parents(d: Dag, j: int) -> frozenset[int]:
    return d.parents(j)


def family(d: Dag, j: int) -> frozenset[int]:
    return d.family(j)


def skeleton_masks(pa: Sequence[int]) -> tuple[int, ...]:
    ch = children_masks(pa)
    return tuple(p | c for p, c in zip(pa, ch))


def skeleton(d: Dag) -> np.ndarray:
    a = d.adj
    return (a | a.T).astype(np.int8)


def v_structure_set(pa: Sequence[int]) -> frozenset[tuple[int, int, int]]:
    sk = skeleton_masks(pa)
    out = []
    for k, m in enumerate(pa):
        ps = list(iter_bits(m))
        for a in range(len(ps)):
            for b in range(a + 1, len(ps)):
                i, j = ps[a], ps[b]
                if not sk[i] >> j & 1:
                    out.append((i, k, j))
    return frozenset(out)


def v_structures(d: Dag) -> frozenset[tuple[int, int, int]]:
    """All ``(i, k, j)`` with ``i -> k <- j``, ``i < j`` and ``i``, ``j`` nonadjacent."""
    return v_structure_set(d.pa)


def d_separated(d: Dag, A: Iterable[int], B: Iterable[int], C: Iterable[int] = ()) -> bool:
    """Whether ``C`` d-separates ``A`` from ``B`` in ``d``."""
    a, b, c = to_mask(A), to_mask(B), to_mask(C)
    full = (1 << d.q) - 1
    if (a | b | c) & ~full:
        raise InvalidQueryError("vertex set out of range")
    if a & b or a & c or b & c:
        raise InvalidQueryError("A, B and C must be pairwise disjoint")
    return not reachable(d.pa, d.ch, a, c) & b


def is_covered(d: Dag, u: int, v: int) -> bool:
    if not d.has_edge(u, v):
        raise InvalidQueryError(f"edge {u}->{v} not in graph")
    return (d.pa[u] | 1 << u) == d.pa[v]


def all_dags(q: int) -> Iterator[Dag]:
    """Every labelled DAG on ``q`` vertices (25 for q=3, 543 for q=4)."""
    pairs = [(i, j) for i in range(q) for j in range(i + 1, q)]
    for states in product((0, 1, 2), repeat=len(pairs)):
        pa = [0] * q
        for (i, j), s in zip(pairs, states):
            if s == 1:
                pa[j] |= 1 << i
            elif s == 2:
                pa[i] |= 1 << j
        if is_acyclic_masks(pa):
            yield Dag(pa)
