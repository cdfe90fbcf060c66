"""General interventions, post-intervention graphs and augmented I-DAGs.

A context's intervention is a target set together with an induced parent set
for each target. Context 0 is always observational. In an augmented graph the
context vertex zeta is stored at index ``q``.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .bits import iter_bits, subsets, to_mask, to_set
from .errors import CorruptedStateError, InvalidQueryError, ValidityError
from .graph import Dag, adjacency_from_parent_masks, all_dags, is_acyclic_masks


class ContextIntervention:
    """Targets and induced parent sets of one experimental context.

    ``induced`` maps each target vertex to its parent set after the
    intervention. Stored internally as a sorted tuple of ``(target, mask)``.
    """

    __slots__ = ("k", "items")

    def __init__(self, k: int, induced: Mapping[int, Iterable[int] | int] | None = None):
        items = []
        for j, ps in (induced or {}).items():
            m = ps if isinstance(ps, int) else to_mask(ps)
            j = int(j)
            if m >> j & 1:
                raise InvalidQueryError(f"target {j} cannot be its own induced parent")
            items.append((j, m))
        items.sort()
        if k == 0 and items:
            raise InvalidQueryError("context 0 is observational and takes no targets")
        object.__setattr__(self, "k", int(k))
        object.__setattr__(self, "items", tuple(items))

    def __setattr__(self, name, value):
        raise AttributeError("ContextIntervention is immutable")

    @classmethod
    def from_masks(cls, k: int, items: Iterable[tuple[int, int]]) -> "ContextIntervention":
        return cls(k, dict(items))

    @property
    def targets(self) -> frozenset[int]:
        return frozenset(j for j, _ in self.items)

    @property
    def target_mask(self) -> int:
        return to_mask(j for j, _ in self.items)

    @property
    def induced_parents(self) -> dict[int, frozenset[int]]:
        return {j: to_set(m) for j, m in self.items}

    def mask_dict(self) -> dict[int, int]:
        return dict(self.items)

    def __eq__(self, other):
        return isinstance(other, ContextIntervention) and (self.k, self.items) == (other.k, other.items)

    def __hash__(self):
        return hash((self.k, self.items))

    def __repr__(self):
        body = ", ".join(f"{j}: {sorted(to_set(m))}" for j, m in self.items)
        return f"ContextIntervention(k={self.k}, {{{body}}})"


class InterventionCollection(tuple):
    """Tuple of :class:`ContextIntervention`, one per context, context 0 observational."""

    def __new__(cls, contexts: Iterable[ContextIntervention]):
        contexts = tuple(contexts)
        if not contexts:
            raise InvalidQueryError("need at least the observational context")
        for i, c in enumerate(contexts):
            if c.k != i:
                raise InvalidQueryError(f"context at position {i} has index {c.k}")
        if contexts[0].items:
            raise InvalidQueryError("first context must be observational")
        return super().__new__(cls, contexts)

    @classmethod
    def observational(cls, K: int = 1) -> "InterventionCollection":
        return cls(ContextIntervention(k) for k in range(K))

    @classmethod
    def from_dicts(cls, per_context: Sequence[Mapping[int, Iterable[int]]]) -> "InterventionCollection":
        """Build from one ``{target: parents}`` dict per interventional context (k >= 1)."""
        return cls([ContextIntervention(0)] + [ContextIntervention(k + 1, d) for k, d in enumerate(per_context)])

    @property
    def K(self) -> int:
        return len(self)

    def target_sets(self) -> list[frozenset[int]]:
        return [c.targets for c in self]

    def replace(self, c: ContextIntervention) -> "InterventionCollection":
        ctx = list(self)
        ctx[c.k] = c
        return InterventionCollection(ctx)

    def __repr__(self):
        return f"InterventionCollection({list(self)!r})"


@dataclass(frozen=True)
class IDag:
    """Post-intervention DAG of context ``k`` plus the context vertex at index ``q``."""

    dag: Dag
    k: int

    @property
    def q(self) -> int:
        return self.dag.q - 1

    @property
    def zeta(self) -> int:
        return self.dag.q - 1

    @property
    def targets(self) -> frozenset[int]:
        return self.dag.children(self.zeta)


# ---------------------------------------------------------------------------

def post_parent_masks(pa: Sequence[int], c: ContextIntervention) -> list[int]:
    out = list(pa)
    for j, m in c.items:
        out[j] = m
    return out


def _check_fits(q: int, c: ContextIntervention) -> None:
    full = (1 << q) - 1
    for j, m in c.items:
        if not 0 <= j < q or m & ~full:
            raise InvalidQueryError(f"intervention on vertex {j} does not fit q={q}")


def post_intervention_graph(d: Dag, c: ContextIntervention) -> np.ndarray:
    """Adjacency of the post-intervention graph; may contain cycles."""
    _check_fits(d.q, c)
    return adjacency_from_parent_masks(post_parent_masks(d.pa, c))


def is_valid(d: Dag, c: ContextIntervention) -> bool:
    _check_fits(d.q, c)
    return is_acyclic_masks(post_parent_masks(d.pa, c))


def is_valid_collection(d: Dag, I: InterventionCollection) -> bool:
    return all(is_valid(d, c) for c in I)


def augmented_parent_masks(pa: Sequence[int], c: ContextIntervention) -> list[int]:
    q = len(pa)
    zbit = 1 << q
    out = list(pa) + [0]
    for j, m in c.items:
        out[j] = m | zbit
    return out


def augment(d: Dag, c: ContextIntervention) -> IDag:
    if not is_valid(d, c):
        raise ValidityError(f"intervention in context {c.k} creates a cycle")
    return IDag(Dag(augmented_parent_masks(d.pa, c)), c.k)


def augment_all(d: Dag, I: InterventionCollection) -> list[IDag]:
    return [augment(d, c) for c in I]


def recover_intervention(d: Dag, idag: IDag) -> ContextIntervention:
    """Read targets and induced parents back off an augmented graph."""
    q = d.q
    if idag.q != q:
        raise InvalidQueryError("augmented graph does not match the DAG size")
    zbit = 1 << q
    pa = idag.dag.pa
    if pa[q]:
        raise CorruptedStateError("context vertex must have no parents")
    items = {}
    for j in range(q):
        if pa[j] & zbit:
            items[j] = pa[j] & ~zbit
        elif pa[j] != d.pa[j]:
            raise CorruptedStateError(f"non-target {j} has parents differing from the DAG")
    return ContextIntervention(idag.k, items)


def _covered_masks(pa: Sequence[int], u: int, v: int) -> bool:
    return pa[v] >> u & 1 and (pa[u] | 1 << u) == pa[v]


def is_simultaneously_covered(d: Dag, I: InterventionCollection, u: int, v: int) -> bool:
    if not d.has_edge(u, v):
        raise InvalidQueryError(f"edge {u}->{v} not in graph")
    if (d.pa[u] | 1 << u) != d.pa[v]:
        return False
    for c in I[1:]:
        tm = c.target_mask
        if tm >> u & 1 and tm >> v & 1:
            continue
        if not is_valid(d, c):
            raise ValidityError(f"intervention in context {c.k} creates a cycle")
        if not _covered_masks(augmented_parent_masks(d.pa, c), u, v):
            return False
    return True


# ---------------------------------------------------------------------------
# enumeration (desk-scale oracles)

def context_interventions(d: Dag, k: int, max_targets: int | None = None) -> Iterator[ContextIntervention]:
    """Every valid intervention for context ``k >= 1`` on ``d``."""
    q = d.q
    full = (1 << q) - 1
    limit = q if max_targets is None else max_targets
    for tmask in range(1 << q):
        if tmask.bit_count() > limit:
            continue
        targets = list(iter_bits(tmask))
        choices = [sorted(subsets(full & ~(1 << j))) for j in targets]
        for combo in product(*choices):
            pa = list(d.pa)
            for j, m in zip(targets, combo):
                pa[j] = m
            if is_acyclic_masks(pa):
                yield ContextIntervention(k, dict(zip(targets, combo)))


def enumerate_states(q: int, K: int, max_targets: int | None = None) -> Iterator[tuple[Dag, InterventionCollection]]:
    """All valid ``(DAG, interventions)`` pairs with ``q`` vertices and ``K`` contexts."""
    for d in all_dags(q):
        per_context = [list(context_interventions(d, k, max_targets)) for k in range(1, K)]
        for combo in product(*per_context):
            yield d, InterventionCollection((ContextIntervention(0),) + combo)
