"""Posterior summaries from chain tallies, and exact posteriors for tiny problems."""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Mapping

import numpy as np

from .errors import CapacityError, InvalidQueryError
from .graph import Dag, all_dags, is_acyclic
from .intervention import ContextIntervention, InterventionCollection, context_interventions
from .mcmc import ChainOutput, ChainState
from .modelprior import PriorHyper, log_prior_joint
from .score import Hyperparams, MultiEnvDataset, Score

EDGE_THRESHOLD = 0.5    # edges need PPI strictly above
TARGET_THRESHOLD = 0.5  # targets need probability at or above
EXACT_CAP = 10**7


def edge_ppi(edge_counts: np.ndarray, n_eff: int) -> np.ndarray:
    """``J[k, u, v]``: fraction of iterations with ``u -> v`` in the context-k graph."""
    if n_eff <= 0:
        raise InvalidQueryError("no post-burn-in iterations to summarise")
    return np.asarray(edge_counts, dtype=float) / n_eff


def target_probability(target_counts: np.ndarray, n_eff: int) -> np.ndarray:
    if n_eff <= 0:
        raise InvalidQueryError("no post-burn-in iterations to summarise")
    out = np.asarray(target_counts, dtype=float) / n_eff
    out[:, 0] = 0.0
    return out


def mpm_graph(J_k: np.ndarray) -> tuple[np.ndarray, bool]:
    """Edges with PPI > 0.5, plus whether the result is acyclic."""
    g = (np.asarray(J_k) > EDGE_THRESHOLD).astype(np.int8)
    np.fill_diagonal(g, 0)
    return g, is_acyclic(g)


def mpm_targets(T_k: np.ndarray) -> np.ndarray:
    return np.flatnonzero(np.asarray(T_k) >= TARGET_THRESHOLD)


def difference_graph(d1: Dag, dk: Dag, T_k) -> np.ndarray:
    q = d1.q
    if dk.q != q:
        raise InvalidQueryError("graphs differ in vertex count")
    G = np.zeros((q, q), dtype=np.int8)
    for v in T_k:
        for u in d1.parents(v) | dk.parents(v):
            G[u, v] = 1
    return G


@dataclass
class PosteriorSummary:
    J: np.ndarray           # (K, q, q) edge PPIs per context graph
    Tprob: np.ndarray       # (q, K)
    diff_prob: np.ndarray   # (K, q, q) difference-graph inclusion frequencies
    mpm: list               # K adjacency estimates
    mpm_acyclic: list
    targets: list           # K arrays of estimated targets (0-based)
    diff: list              # K difference-graph estimates, zero matrix for k = 0

    @property
    def K(self) -> int:
        return self.J.shape[0]


def summarize(out: ChainOutput) -> PosteriorSummary:
    J = edge_ppi(out.edge_counts, out.n_eff)
    Tp = target_probability(out.target_counts, out.n_eff)
    Gp = np.asarray(out.diff_counts, dtype=float) / out.n_eff
    mpm, flags, targets, diff = [], [], [], []
    for k in range(out.K):
        g, ok = mpm_graph(J[k])
        mpm.append(g)
        flags.append(ok)
        targets.append(mpm_targets(Tp[:, k]))
        diff.append((Gp[k] > EDGE_THRESHOLD).astype(np.int8))
    return PosteriorSummary(J, Tp, Gp, mpm, flags, targets, diff)


def mpm_state(summary: PosteriorSummary) -> tuple[np.ndarray, list[dict[int, int]]]:
    """Observational MPM adjacency and, per context, estimated targets with MPM parents."""
    q = summary.J.shape[1]
    ctx = [{}]
    for k in range(1, summary.K):
        col = summary.mpm[k]
        ctx.append({int(j): int(sum(1 << i for i in np.flatnonzero(col[:, j]))) for j in summary.targets[k]})
    return summary.mpm[0], ctx


# ---------------------------------------------------------------------------
# exact enumeration

def enumerate_valid_states(q: int, K: int, cap: int = EXACT_CAP):
    count = 0
    for d in all_dags(q):
        per_ctx = [list(context_interventions(d, k)) for k in range(1, K)]
        n = math.prod(len(x) for x in per_ctx)
        count += n
        if count > cap:
            raise CapacityError("state space too large for exact enumeration", count)
        for combo in product(*per_ctx):
            yield d, InterventionCollection((ContextIntervention(0),) + combo)


def exact_posterior(data: MultiEnvDataset, h: Hyperparams, priors: PriorHyper,
                    cap: int = EXACT_CAP) -> dict[tuple, float]:
    """Normalised posterior over every valid state, keyed like ``ChainState.key()``."""
    score = Score(data, h)
    keys, logs = [], []
    for d, I in enumerate_valid_states(data.q, data.K, cap):
        keys.append(ChainState.from_pair(d, I).key())
        logs.append(score.total(d.pa, I) + log_prior_joint(d, I, priors))
    lp = np.array(logs)
    w = np.exp(lp - lp.max())
    w /= math.fsum(w)
    return dict(zip(keys, w.tolist()))


def empirical_distribution(state_counts: Mapping[tuple, int]) -> dict[tuple, float]:
    total = sum(state_counts.values())
    if total <= 0:
        raise InvalidQueryError("no states recorded")
    return {k: c / total for k, c in state_counts.items()}


def total_variation(p: Mapping[tuple, float], r: Mapping[tuple, float]) -> float:
    keys = set(p) | set(r)
    return 0.5 * math.fsum(abs(p.get(k, 0.0) - r.get(k, 0.0)) for k in keys)
