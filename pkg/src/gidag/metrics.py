"""Evaluation metrics for simulation studies."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import GidagError, InvalidQueryError
from .equivalence import enumerate_class
from .graph import Dag, parent_masks_from_adjacency
from .intervention import ContextIntervention, InterventionCollection, is_valid_collection
from .posterior import PosteriorSummary, difference_graph, mpm_state


def _pair_type(g: np.ndarray, i: int, j: int) -> int:
    # 0 none, 1 i -> j, 2 j -> i, 3 undirected
    return int(g[i, j]) | int(g[j, i]) << 1


def shd(g1, g2) -> int:
    """Structural Hamming distance between (partially directed) adjacency matrices.

    An undirected edge is stored as both entries set. Each unordered pair
    whose edge status differs (missing, either direction, undirected) adds 1.
    """
    a, b = np.asarray(g1), np.asarray(g2)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidQueryError(f"graphs have incompatible shapes {a.shape} and {b.shape}")
    q = a.shape[0]
    return sum(_pair_type(a, i, j) != _pair_type(b, i, j) for i in range(q) for j in range(i + 1, q))


def target_errors(T_true, T_est) -> int:
    """False positives plus false negatives, summed over interventional contexts."""
    if len(T_true) != len(T_est):
        raise InvalidQueryError("target lists cover different numbers of contexts")
    return sum(len(set(a) ^ set(b)) for a, b in list(zip(T_true, T_est))[1:])


def diff_graph_errors(G_true, G_est) -> int:
    a, b = np.asarray(G_true).astype(bool), np.asarray(G_est).astype(bool)
    if a.shape != b.shape:
        raise InvalidQueryError("difference graphs differ in shape")
    return int(np.sum(a ^ b))


def class_representatives(d: Dag, I: InterventionCollection) -> list[np.ndarray]:
    return enumerate_class((d, I)).representatives


def true_difference_graphs(d: Dag, I: InterventionCollection) -> list[np.ndarray]:
    out = [np.zeros((d.q, d.q), dtype=np.int8)]
    for c in I[1:]:
        pa = list(d.pa)
        for j, m in c.items:
            pa[j] = m
        out.append(difference_graph(d, Dag(pa), c.targets))
    return out


@dataclass
class EvalReport:
    shd: list = field(default_factory=list)
    target_errors: list = field(default_factory=list)
    diff_errors: list = field(default_factory=list)
    estimate_is_class_member: bool = True

    @property
    def shd_obs(self) -> int:
        return self.shd[0]

    @property
    def total_target_errors(self) -> int:
        return sum(self.target_errors)

    @property
    def total_diff_errors(self) -> int:
        return sum(self.diff_errors)

    def to_dict(self) -> dict:
        out = asdict(self)
        out.update(shd_obs=self.shd_obs, total_target_errors=self.total_target_errors,
                   total_diff_errors=self.total_diff_errors)
        return out


def estimated_representatives(summary: PosteriorSummary) -> tuple[list[np.ndarray], bool]:
    """I-EG representatives of the MPM estimate, or the raw MPM graphs if it is not a valid pair."""
    adj, ctx = mpm_state(summary)
    try:
        d = Dag(parent_masks_from_adjacency(adj))
        I = InterventionCollection([ContextIntervention(0)] + [ContextIntervention(k, c) for k, c in enumerate(ctx) if k])
        if is_valid_collection(d, I):
            return class_representatives(d, I), True
    except GidagError:
        pass
    return [g.copy() for g in summary.mpm], False


def evaluate(truth: tuple[Dag, InterventionCollection], summary: PosteriorSummary) -> EvalReport:
    d, I = truth
    true_reps = class_representatives(d, I)
    est_reps, ok = estimated_representatives(summary)
    true_diff = true_difference_graphs(d, I)
    T_true = [sorted(c.targets) for c in I]
    T_est = [list(map(int, t)) for t in summary.targets]
    return EvalReport(
        shd=[shd(a, b) for a, b in zip(true_reps, est_reps)],
        target_errors=[len(set(a) ^ set(b)) for a, b in list(zip(T_true, T_est))[1:]],
        diff_errors=[diff_graph_errors(a, b) for a, b in list(zip(true_diff, summary.diff))[1:]],
        estimate_is_class_member=ok,
    )
