"""Ground-truth generation and Gaussian SEM sampling for simulation studies.

Node ``j`` in context ``k`` follows ``X_j = sum_l B^k[l, j] X_l + eps_j`` with
``eps_j ~ N(0, D^k_jj)``. Non-targets share the observational coefficients
and variance; targets get a fresh coefficient column on their induced parents.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bits import iter_bits
from .errors import CorruptedStateError, InvalidQueryError
from .graph import Dag, topological_order_masks
from .intervention import ContextIntervention, InterventionCollection, is_valid_collection, post_parent_masks

TARGET_PROB = 0.2
COEF_LOW, COEF_HIGH = 0.1, 1.0


@dataclass
class SemParams:
    """``B[k]`` (q x q, column j = coefficients into j) and ``Dvar[k]`` per context."""

    B: list
    Dvar: list

    @property
    def K(self) -> int:
        return len(self.B)

    @property
    def q(self) -> int:
        return self.B[0].shape[0]


def edge_probability(q: int) -> float:
    return 3.0 / (2 * q - 2)


def _draw_coefs(rng: np.random.Generator, n: int) -> np.ndarray:
    mag = rng.uniform(COEF_LOW, COEF_HIGH, size=n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    return mag * sign


def _random_ordered_dag(rng: np.random.Generator, q: int, p: float) -> list[int]:
    """Parent masks of a DAG compatible with the identity ordering."""
    draws = rng.random((q, q)) < p
    pa = []
    for j in range(q):
        m = 0
        for i in range(j):
            if draws[i, j]:
                m |= 1 << i
        pa.append(m)
    return pa


def gen_truth(q: int, K: int, seed) -> tuple[Dag, InterventionCollection, SemParams]:
    if q < 2 or K < 1:
        raise InvalidQueryError("need q >= 2 and K >= 1")
    rng = np.random.default_rng(seed)
    p = edge_probability(q)
    pa = _random_ordered_dag(rng, q, p)
    ctx = [ContextIntervention(0)]
    for k in range(1, K):
        targets = np.flatnonzero(rng.random(q) < TARGET_PROB)
        fresh = _random_ordered_dag(rng, q, p)
        ctx.append(ContextIntervention(k, {int(j): fresh[j] for j in targets}))
    I = InterventionCollection(ctx)
    d = Dag(pa)
    if not is_valid_collection(d, I):
        raise CorruptedStateError("generated intervention is not valid")

    B0 = np.zeros((q, q))
    for j in range(q):
        par = list(iter_bits(pa[j]))
        B0[par, j] = _draw_coefs(rng, len(par))
    Bs, Ds = [B0], [np.ones(q)]
    for c in I[1:]:
        Bk = B0.copy()
        for j, m in c.items:
            Bk[:, j] = 0.0
            par = list(iter_bits(m))
            Bk[par, j] = _draw_coefs(rng, len(par))
        Bs.append(Bk)
        Ds.append(np.ones(q))
    return d, I, SemParams(Bs, Ds)


def sigma_from(params: SemParams, k: int) -> np.ndarray:
    B = params.B[k]
    q = B.shape[0]
    A = np.linalg.inv(np.eye(q) - B)
    S = A.T @ np.diag(params.Dvar[k]) @ A
    return 0.5 * (S + S.T)


def sample_block(params: SemParams, k: int, n: int, seed) -> np.ndarray:
    """``n`` draws from context ``k`` by ancestral sampling."""
    rng = np.random.default_rng(seed)
    B = params.B[k]
    q = B.shape[0]
    pa = [int(sum(1 << i for i in np.flatnonzero(B[:, j]))) for j in range(q)]
    order = topological_order_masks(pa)
    if order is None:
        raise CorruptedStateError(f"context {k} coefficients are cyclic")
    eps = rng.standard_normal((n, q)) * np.sqrt(params.Dvar[k])
    X = np.zeros((n, q))
    for j in order:
        X[:, j] = X @ B[:, j] + eps[:, j]
    return X


def simulate(q: int, K: int, n, seed) -> tuple[Dag, InterventionCollection, SemParams, list[np.ndarray]]:
    """Truth plus one data block per context; ``n`` is an int or a per-context list."""
    ss = np.random.SeedSequence(seed)
    truth_seed, *block_seeds = ss.spawn(K + 1)
    d, I, params = gen_truth(q, K, truth_seed)
    ns = [n] * K if np.isscalar(n) else list(n)
    if len(ns) != K:
        raise InvalidQueryError("need one sample size per context")
    blocks = [sample_block(params, k, int(ns[k]), block_seeds[k]) for k in range(K)]
    return d, I, params, blocks


def params_support_ok(d: Dag, I: InterventionCollection, params: SemParams) -> bool:
    for c in I:
        pk = post_parent_masks(d.pa, c)
        for j in range(d.q):
            nz = int(sum(1 << i for i in np.flatnonzero(params.B[c.k][:, j])))
            if nz != pk[j]:
                return False
    return True
