"""Interventional Gaussian-Wishart (BGe-type) marginal likelihood.

The likelihood factorises over nodes. Node ``j`` contributes a family/parent
ratio of marginal data densities computed on the pooled rows of every context
where ``j`` is not intervened on, plus one such ratio per context that does
intervene on ``j`` (using that context's own parents of ``j``). Each marginal
density is available in closed form under a Wishart prior on the precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import multigammaln

from .bits import iter_bits
from .errors import DataError, HyperparameterError, NumericError, ValidityError
from .intervention import InterventionCollection, is_valid_collection

LOG_PI = math.log(math.pi)
EIG_TOL = 1e-10


def _logdet_spd(M: np.ndarray) -> float:
    """log|M| via Cholesky, falling back to eigenvalues for borderline matrices."""
    try:
        L = np.linalg.cholesky(M)
        return 2.0 * float(np.sum(np.log(np.diag(L))))
    except np.linalg.LinAlgError:
        w = np.linalg.eigvalsh(M)
        if w[0] <= EIG_TOL:
            raise NumericError(f"matrix not positive definite (smallest eigenvalue {w[0]:.3g})")
        return float(np.sum(np.log(w)))


@dataclass(frozen=True)
class Hyperparams:
    """Wishart prior ``Omega ~ W(a, U)`` on the precision matrix."""

    a: float
    U: np.ndarray

    def __post_init__(self):
        U = np.asarray(self.U, dtype=float)
        if U.ndim != 2 or U.shape[0] != U.shape[1]:
            raise HyperparameterError("U must be a square matrix")
        if not np.allclose(U, U.T, rtol=0, atol=1e-12):
            raise HyperparameterError("U must be symmetric")
        try:
            np.linalg.cholesky(U)
        except np.linalg.LinAlgError:
            raise HyperparameterError("U must be positive definite") from None
        q = U.shape[0]
        if not self.a > q - 1:
            raise HyperparameterError(f"Wishart degrees of freedom a={self.a} must exceed q-1={q - 1}")
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "a", float(self.a))

    @property
    def q(self) -> int:
        return self.U.shape[0]

    @classmethod
    def default(cls, q: int) -> "Hyperparams":
        return cls(float(q), np.eye(q))


def hyperparams_from_config(cfg: dict, q: int, base_dir: str | Path | None = None) -> Hyperparams:
    """Read ``wishart_a`` (number or ``"q"``) and ``wishart_U`` (``"identity"`` or CSV path)."""
    a = cfg.get("wishart_a", "q")
    if a == "q":
        a = float(q)
    elif isinstance(a, bool) or not isinstance(a, (int, float)):
        raise HyperparameterError(f"wishart_a must be a number or 'q', got {a!r}")
    U = cfg.get("wishart_U", "identity")
    if U == "identity":
        U = np.eye(q)
    else:
        path = Path(U)
        if base_dir is not None and not path.is_absolute():
            path = Path(base_dir) / path
        try:
            U = np.loadtxt(path, delimiter=",", ndmin=2)
        except (OSError, ValueError) as e:
            raise HyperparameterError(f"cannot read wishart_U from {path}: {e}") from None
        if U.shape != (q, q):
            raise HyperparameterError(f"wishart_U has shape {U.shape}, expected {(q, q)}")
    return Hyperparams(a, U)


class MultiEnvDataset:
    """Observations from ``K`` contexts; ``blocks[0]`` is observational."""

    def __init__(self, blocks: Sequence[np.ndarray]):
        if not blocks:
            raise DataError("dataset needs at least one context")
        arrs = []
        q = None
        for k, b in enumerate(blocks):
            b = np.asarray(b, dtype=float)
            if b.ndim != 2:
                raise DataError(f"context {k} block must be a 2-d array")
            if q is None:
                q = b.shape[1]
            elif b.shape[1] != q:
                raise DataError(f"context {k} has {b.shape[1]} columns, expected {q}")
            if not np.all(np.isfinite(b)):
                raise DataError(f"context {k} contains non-finite values")
            arrs.append(b)
        if q < 1:
            raise DataError("dataset needs at least one variable")
        self.blocks = arrs
        self.q = q

    @property
    def K(self) -> int:
        return len(self.blocks)

    @property
    def n(self) -> list[int]:
        return [b.shape[0] for b in self.blocks]


def contexts_not_intervened(I: InterventionCollection, j: int) -> frozenset[int]:
    return frozenset(c.k for c in I if j not in c.targets)


def _lmd_from_gram(gram: np.ndarray, n: int, idx: list[int], h: Hyperparams) -> float:
    p = len(idx)
    if p == 0 or n == 0:
        return 0.0
    q = h.q
    shape = h.a - (q - p)
    U_BB = h.U[np.ix_(idx, idx)]
    Ut_BB = U_BB + gram[np.ix_(idx, idx)]
    return (
        -0.5 * n * p * LOG_PI
        + 0.5 * shape * _logdet_spd(U_BB)
        - 0.5 * (shape + n) * _logdet_spd(Ut_BB)
        + multigammaln(0.5 * (shape + n), p)
        - multigammaln(0.5 * shape, p)
    )


def log_marginal_data(rows: np.ndarray, B: Iterable[int], h: Hyperparams) -> float:
    """Log marginal density of the columns ``B`` of ``rows`` (n x q)."""
    X = np.asarray(rows, dtype=float)
    if X.ndim != 2 or X.shape[1] != h.q:
        raise DataError(f"rows must have {h.q} columns")
    idx = sorted(set(int(b) for b in B))
    if idx and not (0 <= idx[0] and idx[-1] < h.q):
        raise DataError("column set out of range")
    if idx and not 0.5 * (h.a - h.q + len(idx)) > 0.5 * (len(idx) - 1):
        raise HyperparameterError("Wishart degrees of freedom too small for this column set")
    return _lmd_from_gram(X.T @ X, X.shape[0], idx, h)


class ScoreCache:
    """Memo of marginal data terms keyed by (column mask, context mask)."""

    def __init__(self):
        self.table: dict[tuple[int, int], float] = {}

    def __len__(self):
        return len(self.table)


class Score:
    """Node-decomposable scorer with per-context-subset Gram matrices.

    Context sets and column sets are int bitmasks (bit k = context k).
    """

    def __init__(self, data: MultiEnvDataset, h: Hyperparams, cache: ScoreCache | None = None):
        if data.q != h.q:
            raise DataError(f"data has {data.q} variables but hyperparameters are for {h.q}")
        self.data = data
        self.h = h
        self.q = data.q
        self.K = data.K
        self.cache = cache if cache is not None else ScoreCache()
        with np.errstate(over="ignore", invalid="ignore"):
            self._grams = [b.T @ b for b in data.blocks]
        if not all(np.all(np.isfinite(g)) for g in self._grams):
            raise NumericError("cross-product matrix overflows; rescale the data")
        self._n = data.n
        self._pooled: dict[int, tuple[np.ndarray, int]] = {}
        self._node: dict[tuple, float] = {}
        self.all_contexts = (1 << self.K) - 1

    def _pool(self, ctx: int) -> tuple[np.ndarray, int]:
        got = self._pooled.get(ctx)
        if got is None:
            g = np.zeros((self.q, self.q))
            n = 0
            for k in iter_bits(ctx):
                g = g + self._grams[k]
                n += self._n[k]
            got = self._pooled[ctx] = (g, n)
        return got

    def lmd(self, B: int, ctx: int) -> float:
        key = (B, ctx)
        v = self.cache.table.get(key)
        if v is None:
            g, n = self._pool(ctx)
            v = _lmd_from_gram(g, n, list(iter_bits(B)), self.h)
            if not math.isfinite(v):
                raise NumericError(f"non-finite marginal data term for columns {sorted(iter_bits(B))}")
            self.cache.table[key] = v
        return v

    def node_term(self, j: int, pa_j: int, targeted: tuple[tuple[int, int], ...]) -> float:
        """Contribution of node ``j``; ``targeted`` lists ``(k, P_j^k)`` for contexts intervening on ``j``."""
        key = (j, pa_j, targeted)
        v = self._node.get(key)
        if v is None:
            bit = 1 << j
            ctx = self.all_contexts
            for k, _ in targeted:
                ctx &= ~(1 << k)
            v = self.lmd(pa_j | bit, ctx) - self.lmd(pa_j, ctx)
            for k, P in targeted:
                c = 1 << k
                v += self.lmd(P | bit, c) - self.lmd(P, c)
            self._node[key] = v
        return v

    def node_terms(self, pa: Sequence[int], I: InterventionCollection) -> list[float]:
        items = [c.mask_dict() for c in I]
        out = []
        for j in range(self.q):
            targeted = tuple((k, m[j]) for k, m in enumerate(items) if j in m)
            out.append(self.node_term(j, pa[j], targeted))
        return out

    def total(self, pa: Sequence[int], I: InterventionCollection) -> float:
        return math.fsum(self.node_terms(pa, I))


def log_marginal_likelihood(d, I: InterventionCollection, data: MultiEnvDataset, h: Hyperparams,
                            cache: ScoreCache | None = None) -> float:
    if d.q != data.q:
        raise DataError("graph and data sizes differ")
    if len(I) != data.K:
        raise DataError(f"{len(I)} interventions for {data.K} data contexts")
    if not is_valid_collection(d, I):
        raise ValidityError("intervention collection is not valid for the DAG")
    return Score(data, h, cache).total(d.pa, I)
