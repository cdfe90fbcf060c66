"""Beta-Bernoulli structure priors with the latent probabilities integrated out.

Every factor has the form ``log B(a + s, b + N - s) - log B(a, b)`` where ``s``
is a count of present indicators out of ``N``: edges of the DAG out of
``q(q-1)/2``, targets of a context out of ``q``, and induced parents of a
target out of ``q``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields

from .errors import HyperparameterError, ValidityError
from .graph import Dag
from .intervention import ContextIntervention, InterventionCollection, is_valid, is_valid_collection


def betaln(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def beta_binomial_log(s: int, N: int, a: float, b: float) -> float:
    return betaln(a + s, b + N - s) - betaln(a, b)


@dataclass(frozen=True)
class PriorHyper:
    a_phi: float = 1.0
    b_phi: float = 1.0
    a_eta: float = 1.0
    b_eta: float = 1.0
    a_D: float = 1.0
    b_D: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0 or not math.isfinite(v):
                raise HyperparameterError(f"{f.name} must be a positive number, got {v!r}")
            object.__setattr__(self, f.name, float(v))

    @classmethod
    def from_config(cls, cfg: dict) -> "PriorHyper":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in cfg.items() if k in names})


def log_prior_dag(d: Dag, h: PriorHyper) -> float:
    q = d.q
    return beta_binomial_log(d.n_edges, q * (q - 1) // 2, h.a_D, h.b_D)


def log_prior_targets(c: ContextIntervention, q: int, h: PriorHyper) -> float:
    if c.k == 0:
        return 0.0
    return beta_binomial_log(len(c.items), q, h.a_eta, h.b_eta)


def log_prior_parent_matrix(c: ContextIntervention, d: Dag, q: int, h: PriorHyper) -> float:
    if not is_valid(d, c):
        raise ValidityError(f"intervention in context {c.k} creates a cycle")
    # q (not q-1) as the number of candidate parents, kept as printed
    return math.fsum(beta_binomial_log(m.bit_count(), q, h.a_phi, h.b_phi) for _, m in c.items)


def log_prior_joint(d: Dag, I: InterventionCollection, h: PriorHyper) -> float:
    if not is_valid_collection(d, I):
        raise ValidityError("intervention collection is not valid for the DAG")
    q = d.q
    parts = [log_prior_dag(d, h)]
    for c in I[1:]:
        parts.append(log_prior_targets(c, q, h))
        parts.append(log_prior_parent_matrix(c, d, q, h))
    return math.fsum(parts)


class PriorTables:
    """Precomputed factors indexed by count, for the sampler's inner loop."""

    def __init__(self, q: int, h: PriorHyper):
        self.dag = [beta_binomial_log(m, q * (q - 1) // 2, h.a_D, h.b_D) for m in range(q * (q - 1) // 2 + 1)]
        self.targets = [beta_binomial_log(t, q, h.a_eta, h.b_eta) for t in range(q + 1)]
        self.parents = [beta_binomial_log(p, q, h.a_phi, h.b_phi) for p in range(q + 1)]
