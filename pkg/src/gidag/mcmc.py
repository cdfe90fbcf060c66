"""Random-scan Metropolis-Hastings over DAGs, targets and induced parents.

Each iteration visits the observational scope (0) and every interventional
context (1..K-1) in a fresh random order. Within a scope an operator is drawn
uniformly from the set of valid operators and accepted with the usual MH
ratio, the proposal part being ``|O(current)| / |O(proposed)|``.

The context vertex zeta is written as ``u == q`` in operators.
"""
from __future__ import annotations

import math
import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .bits import iter_bits
from .errors import CorruptedStateError, InvalidQueryError
from .graph import Dag, descendant_masks, is_acyclic_masks, topological_order_masks
from .intervention import ContextIntervention, InterventionCollection
from .modelprior import PriorHyper, PriorTables
from .score import Hyperparams, MultiEnvDataset, Score, ScoreCache

INSERT, DELETE, REVERSE = "insert", "delete", "reverse"


class Operator(NamedTuple):
    kind: str
    u: int
    v: int
    scope: int


# ---------------------------------------------------------------------------
# state

class ChainState:
    """Mutable-by-copy sampler state.

    ``T[k]`` is the target mask of context k (``T[0] == 0``) and ``P[k][j]``
    the induced parent mask of target j (0 for non-targets).
    """

    __slots__ = ("q", "K", "pa", "T", "P", "_desc")

    def __init__(self, pa: Sequence[int], T: Sequence[int], P: Sequence[Sequence[int]], _desc=None):
        self.q = len(pa)
        self.K = len(T)
        self.pa = list(pa)
        self.T = list(T)
        self.P = [list(p) for p in P]
        self._desc = _desc if _desc is not None else [None] * self.K

    @classmethod
    def empty(cls, q: int, K: int) -> "ChainState":
        return cls([0] * q, [0] * K, [[0] * q for _ in range(K)])

    @classmethod
    def from_pair(cls, d: Dag, I: InterventionCollection) -> "ChainState":
        q = d.q
        T = [c.target_mask for c in I]
        P = []
        for c in I:
            row = [0] * q
            for j, m in c.items:
                row[j] = m
            P.append(row)
        st = cls(d.pa, T, P)
        st.check()
        return st

    def to_pair(self) -> tuple[Dag, InterventionCollection]:
        ctx = [ContextIntervention(k, {j: self.P[k][j] for j in iter_bits(self.T[k])}) for k in range(self.K)]
        return Dag(self.pa), InterventionCollection(ctx)

    def key(self) -> tuple:
        return (tuple(self.pa), tuple((self.T[k], tuple(self.P[k][j] for j in iter_bits(self.T[k]))) for k in range(self.K)))

    def post(self, k: int) -> list[int]:
        T, P, pa = self.T[k], self.P[k], self.pa
        return [P[j] if T >> j & 1 else pa[j] for j in range(self.q)]

    def desc(self, k: int) -> list[int]:
        d = self._desc[k]
        if d is None:
            pk = self.post(k)
            order = topological_order_masks(pk)
            if order is None:
                raise CorruptedStateError(f"context {k} graph has a cycle")
            d = self._desc[k] = descendant_masks(pk, order)
        return d

    def check(self) -> None:
        if self.T[0] or any(self.P[0]):
            raise CorruptedStateError("observational context carries targets")
        for k in range(self.K):
            for j in range(self.q):
                if not self.T[k] >> j & 1 and self.P[k][j]:
                    raise CorruptedStateError(f"non-target {j} of context {k} has induced parents")
                if self.P[k][j] >> j & 1:
                    raise CorruptedStateError(f"target {j} of context {k} is its own parent")
            if not is_acyclic_masks(self.post(k)):
                raise CorruptedStateError(f"context {k} graph has a cycle")

    def n_edges(self) -> int:
        return sum(m.bit_count() for m in self.pa)

    def targeted(self, j: int) -> tuple[tuple[int, int], ...]:
        return tuple((k, self.P[k][j]) for k in range(1, self.K) if self.T[k] >> j & 1)

    def copy(self) -> "ChainState":
        return ChainState(self.pa, self.T, self.P, list(self._desc))


# ---------------------------------------------------------------------------
# operator sets

def _reaches(desc: Sequence[int], sources: int, v: int) -> bool:
    """Whether some vertex of ``sources`` is ``v`` or has ``v`` as a descendant."""
    for c in iter_bits(sources):
        if c == v or desc[c] >> v & 1:
            return True
    return False


def build_operator_set_obs(state: ChainState) -> list[Operator]:
    q, K = state.q, state.K
    pa, T = state.pa, state.T
    descs = [state.desc(k) for k in range(K)]
    chs = []
    for k in range(K):
        pk = state.post(k)
        ch = [0] * q
        for j, m in enumerate(pk):
            for i in iter_bits(m):
                ch[i] |= 1 << j
        chs.append(ch)
    ops = []
    for v in range(q):
        vbit = 1 << v
        for u in range(q):
            if u == v:
                continue
            if pa[v] >> u & 1:
                ops.append(Operator(DELETE, u, v, 0))
                ok = True
                for k in range(K):
                    if T[k] >> u & 1:
                        continue  # u keeps its parents, at most u -> v disappears
                    if T[k] >> v & 1:
                        # v keeps its parents; adding v -> u closes a cycle iff u reaches v
                        if descs[k][u] >> v & 1:
                            ok = False
                            break
                    elif _reaches(descs[k], chs[k][u] & ~vbit, v):
                        ok = False
                        break
                if ok:
                    ops.append(Operator(REVERSE, u, v, 0))
            elif not pa[u] >> v & 1:
                ok = True
                for k in range(K):
                    if not T[k] >> v & 1 and descs[k][v] >> u & 1:
                        ok = False
                        break
                if ok:
                    ops.append(Operator(INSERT, u, v, 0))
    return ops


def build_operator_set_int(state: ChainState, k: int) -> list[Operator]:
    if not 1 <= k < state.K:
        raise InvalidQueryError(f"scope {k} is not an interventional context")
    q = state.q
    full = (1 << q) - 1
    T, P, pa = state.T[k], state.P[k], state.pa
    desc = state.desc(k)
    pk = state.post(k)
    ops = []
    for v in range(q):
        vbit = 1 << v
        if not T & vbit:
            ops.append(Operator(INSERT, q, v, k))
            continue
        nd = full & ~desc[v] & ~vbit
        for u in iter_bits(nd):
            if P[v] >> u & 1:
                ops.append(Operator(DELETE, u, v, k))
                if T >> u & 1:
                    ch_u = 0
                    for j in range(q):
                        if pk[j] >> u & 1:
                            ch_u |= 1 << j
                    if not _reaches(desc, ch_u & ~vbit, v):
                        ops.append(Operator(REVERSE, u, v, k))
            else:
                ops.append(Operator(INSERT, u, v, k))
        # hoisted out of the loop over u: one removal move per target
        if P[v] == pa[v]:
            ops.append(Operator(DELETE, q, v, k))
    return ops


def build_operator_set(state: ChainState, scope: int) -> list[Operator]:
    return build_operator_set_obs(state) if scope == 0 else build_operator_set_int(state, scope)


def max_operator_count(q: int, scope: int) -> int:
    return q * (q - 1) if scope == 0 else q * (2 * q - 1)


def apply_operator(state: ChainState, op: Operator) -> ChainState:
    kind, u, v, k = op
    q = state.q
    new = ChainState.__new__(ChainState)
    new.q, new.K = q, state.K
    new.T = state.T
    new.P = state.P
    new.pa = state.pa
    if k == 0:
        pa = new.pa = list(state.pa)
        if kind == INSERT:
            pa[v] |= 1 << u
        elif kind == DELETE:
            pa[v] &= ~(1 << u)
        else:
            pa[v] &= ~(1 << u)
            pa[u] |= 1 << v
        new._desc = [None] * state.K
        return new
    T = new.T = list(state.T)
    P = new.P = list(state.P)
    Pk = P[k] = list(state.P[k])
    if u == q:
        if kind == INSERT:
            T[k] |= 1 << v
            Pk[v] = state.pa[v]
        else:
            T[k] &= ~(1 << v)
            Pk[v] = 0
    elif kind == INSERT:
        Pk[v] |= 1 << u
    elif kind == DELETE:
        Pk[v] &= ~(1 << u)
    else:
        Pk[v] &= ~(1 << u)
        Pk[u] |= 1 << v
    new._desc = list(state._desc)
    new._desc[k] = None
    return new


def inverse_operator(op: Operator) -> Operator:
    kind, u, v, k = op
    if kind == INSERT:
        return Operator(DELETE, u, v, k)
    if kind == DELETE:
        return Operator(INSERT, u, v, k)
    return Operator(REVERSE, v, u, k)


# ---------------------------------------------------------------------------
# scoring helpers

def log_prior_state(state: ChainState, tables: PriorTables) -> float:
    total = tables.dag[state.n_edges()]
    for k in range(1, state.K):
        T = state.T[k]
        total += tables.targets[T.bit_count()]
        Pk = state.P[k]
        for j in iter_bits(T):
            total += tables.parents[Pk[j].bit_count()]
    return total


def log_score_state(state: ChainState, score: Score) -> float:
    return math.fsum(score.node_term(j, state.pa[j], state.targeted(j)) for j in range(state.q))


def _affected(op: Operator) -> tuple[int, ...]:
    return (op.u, op.v) if op.kind == REVERSE else (op.v,)


class Sampler:
    """One chain's mutable machinery: current state, caches and the RNG."""

    def __init__(self, data: MultiEnvDataset, h: Hyperparams, priors: PriorHyper, rng: np.random.Generator,
                 init: ChainState | None = None, cache: ScoreCache | None = None):
        self.score = Score(data, h, cache)
        self.q, self.K = data.q, data.K
        self.tables = PriorTables(self.q, priors)
        self.rng = rng
        self.state = init.copy() if init is not None else ChainState.empty(self.q, self.K)
        if self.state.q != self.q or self.state.K != self.K:
            raise InvalidQueryError("initial state does not match the data dimensions")
        self.state.check()
        self.log_prior = log_prior_state(self.state, self.tables)
        self.log_score = log_score_state(self.state, self.score)
        self.version = 0
        self._ops: dict[int, list[Operator]] = {}
        self._log_max = [math.log(max_operator_count(self.q, s)) for s in range(self.K)]
        self.accepted = [0] * self.K
        self.proposed = [0] * self.K

    def operators(self, scope: int) -> list[Operator]:
        ops = self._ops.get(scope)
        if ops is None:
            ops = self._ops[scope] = build_operator_set(self.state, scope)
        return ops

    def step(self, scope: int) -> bool:
        """One MH update of ``scope``; returns whether the move was accepted."""
        st = self.state
        ops = self.operators(scope)
        n_cur = len(ops)
        op = ops[int(self.rng.integers(n_cur))]
        logu = math.log(self.rng.random())
        self.proposed[scope] += 1
        new = apply_operator(st, op)
        sc = self.score
        delta = 0.0
        for j in _affected(op):
            delta += sc.node_term(j, new.pa[j], new.targeted(j)) - sc.node_term(j, st.pa[j], st.targeted(j))
        new_prior = log_prior_state(new, self.tables)
        base = delta + new_prior - self.log_prior + math.log(n_cur)
        new_ops = None
        # |O(proposed)| lies in [1, max]; only count it when the bounds don't decide
        if logu < base - self._log_max[scope]:
            accept = True
        elif logu >= base:
            accept = False
        else:
            new_ops = build_operator_set(new, scope)
            accept = logu < base - math.log(len(new_ops))
        if accept:
            self.state = new
            self.log_prior = new_prior
            self.log_score += delta
            self.version += 1
            self.accepted[scope] += 1
            self._ops = {scope: new_ops} if new_ops is not None else {}
        return accept

    def iterate(self) -> None:
        for scope in self.rng.permutation(self.K):
            self.step(int(scope))


# ---------------------------------------------------------------------------
# chains

@dataclass
class ChainOutput:
    q: int
    K: int
    S: int
    burn_in: int
    thin: int
    seed: object
    n_eff: int
    edge_counts: np.ndarray      # (K, q, q): iterations with u -> v in the context-k graph
    target_counts: np.ndarray    # (q, K)
    diff_counts: np.ndarray      # (K, q, q): difference-graph indicators, zero for k = 0
    accepted: list
    proposed: list
    samples: list = field(default_factory=list)   # (iteration, state key)
    state_counts: Counter | None = None
    final_state: tuple | None = None


def state_indicators(state: ChainState) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    q, K = state.q, state.K
    E = np.zeros((K, q, q), dtype=np.int64)
    Tm = np.zeros((q, K), dtype=np.int64)
    G = np.zeros((K, q, q), dtype=np.int64)
    for k in range(K):
        pk = state.post(k)
        for v in range(q):
            for u in iter_bits(pk[v]):
                E[k, u, v] = 1
        for v in iter_bits(state.T[k]):
            Tm[v, k] = 1
            for u in iter_bits(state.pa[v] | state.P[k][v]):
                G[k, u, v] = 1
    return E, Tm, G


def state_from_key(key: tuple) -> ChainState:
    pa, ctx = key
    q = len(pa)
    T = [t for t, _ in ctx]
    P = []
    for t, ms in ctx:
        row = [0] * q
        for j, m in zip(iter_bits(t), ms):
            row[j] = m
        P.append(row)
    return ChainState(pa, T, P)


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence(int(seed)).spawn(1)[0]
    return np.random.Generator(np.random.Philox(ss))


def run_chain(data: MultiEnvDataset, h: Hyperparams, priors: PriorHyper, S: int, burn_in: int = 0, thin: int = 1,
              seed=0, init: ChainState | None = None, keep_samples: bool = True, track_states: bool = False,
              debug: bool = False) -> ChainOutput:
    """Run one chain for ``S`` iterations and tally the post-burn-in ones.

    ``seed`` is an int or a ``SeedSequence``; an int uses its first spawned
    child, so a single chain matches chain 0 of :func:`run_chains`.
    """
    if S < 0 or burn_in < 0 or thin < 1:
        raise InvalidQueryError("need S >= 0, burn_in >= 0 and thin >= 1")
    if S and burn_in >= S:
        raise InvalidQueryError("burn_in must be smaller than S")
    sampler = Sampler(data, h, priors, _rng(seed), init)
    q, K = sampler.q, sampler.K
    E = np.zeros((K, q, q), dtype=np.int64)
    Tm = np.zeros((q, K), dtype=np.int64)
    G = np.zeros((K, q, q), dtype=np.int64)
    samples = []
    states = Counter() if track_states else None
    snap = None
    snap_version = -1
    weight = 0
    snap_key = None

    def flush():
        nonlocal E, Tm, G
        if weight:
            e, t, g = snap
            E += weight * e
            Tm += weight * t
            G += weight * g
            if states is not None:
                states[snap_key] += weight

    for s in range(1, S + 1):
        sampler.iterate()
        if debug:
            sampler.state.check()
            if abs(log_score_state(sampler.state, sampler.score) - sampler.log_score) > 1e-9:
                raise CorruptedStateError("incremental log score drifted from recomputation")
            if abs(log_prior_state(sampler.state, sampler.tables) - sampler.log_prior) > 1e-9:
                raise CorruptedStateError("cached log prior drifted")
        if s <= burn_in:
            continue
        if sampler.version != snap_version:
            flush()
            snap = state_indicators(sampler.state)
            snap_key = sampler.state.key() if states is not None else None
            snap_version = sampler.version
            weight = 0
        weight += 1
        if keep_samples and (s - burn_in) % thin == 0:
            samples.append((s, sampler.state.key()))
    flush()
    return ChainOutput(
        q=q, K=K, S=S, burn_in=burn_in, thin=thin, seed=seed,
        n_eff=max(S - burn_in, 0) if S else 0,
        edge_counts=E, target_counts=Tm, diff_counts=G,
        accepted=list(sampler.accepted), proposed=list(sampler.proposed),
        samples=samples, state_counts=states, final_state=sampler.state.key(),
    )


def _run_chain_job(args):
    return run_chain(*args[0], **args[1])


def worker_count(requested: int | None = None) -> int:
    env = os.environ.get("GIDAG_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    n = requested if requested is not None else cap
    return max(1, min(n, cap))


def run_chains(data: MultiEnvDataset, h: Hyperparams, priors: PriorHyper, S: int, burn_in: int = 0, thin: int = 1,
               seed: int = 0, chains: int = 1, workers: int | None = None, **kw) -> list[ChainOutput]:
    """Independent chains on spawned Philox streams; results do not depend on ``workers``."""
    seqs = np.random.SeedSequence(int(seed)).spawn(chains)
    jobs = [((data, h, priors, S, burn_in, thin, ss), kw) for ss in seqs]
    n = min(worker_count(workers), chains)
    if n <= 1:
        outs = [_run_chain_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=n) as ex:
            outs = list(ex.map(_run_chain_job, jobs))
    for i, o in enumerate(outs):
        o.seed = (int(seed), i)
    return outs


def pool_outputs(outs: Sequence[ChainOutput]) -> ChainOutput:
    first = outs[0]
    states = None
    if all(o.state_counts is not None for o in outs):
        states = Counter()
        for o in outs:
            states.update(o.state_counts)
    return ChainOutput(
        q=first.q, K=first.K, S=first.S, burn_in=first.burn_in, thin=first.thin,
        seed=[o.seed for o in outs], n_eff=sum(o.n_eff for o in outs),
        edge_counts=sum(o.edge_counts for o in outs), target_counts=sum(o.target_counts for o in outs),
        diff_counts=sum(o.diff_counts for o in outs),
        accepted=[sum(x) for x in zip(*(o.accepted for o in outs))],
        proposed=[sum(x) for x in zip(*(o.proposed for o in outs))],
        samples=[s for o in outs for s in o.samples], state_counts=states, final_state=None,
    )


# ---------------------------------------------------------------------------
# proposal-only dynamics (irreducibility checks)

def proposal_chain_walk(init: ChainState, steps: int, seed=0) -> list[tuple]:
    """Visited state keys of the always-accept chain, starting with ``init``."""
    rng = _rng(seed)
    state = init.copy()
    trace = [state.key()]
    for _ in range(steps):
        for scope in rng.permutation(state.K):
            ops = build_operator_set(state, int(scope))
            state = apply_operator(state, ops[int(rng.integers(len(ops)))])
        trace.append(state.key())
    return trace


def proposal_closure(init: ChainState, cap: int = 10**6) -> set[tuple]:
    """All states reachable from ``init`` through operator moves of any scope."""
    seen = {init.key()}
    stack = [init]
    while stack:
        st = stack.pop()
        for scope in range(st.K):
            for op in build_operator_set(st, scope):
                nxt = apply_operator(st, op)
                key = nxt.key()
                if key not in seen:
                    seen.add(key)
                    if len(seen) > cap:
                        raise InvalidQueryError("state space exceeds the closure cap")
                    stack.append(nxt)
    return seen
