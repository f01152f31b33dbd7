"""Ranking candidates: max, noisy-or and clustered (non-redundant) noisy-or."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError
from .inference import CandidatePool, CompletionTask

DEFAULT_TOPK = 100
_CLAMP = 1.0 - 1e-15
_LOG_SPACE_BELOW = 1e-12


@dataclass
class CandidateRanking:
    task: CompletionTask | None
    entries: list[tuple[int, float]]
    provenance: dict[int, list[int]] = field(default_factory=dict)
    clusters: dict[int, list[int]] = field(default_factory=dict)

    def top(self, k: int) -> CandidateRanking:
        keep = self.entries[:k]
        ents = {e for e, _ in keep}
        return CandidateRanking(
            self.task, keep,
            {e: v for e, v in self.provenance.items() if e in ents},
            {e: v for e, v in self.clusters.items() if e in ents},
        )

    @property
    def entities(self) -> list[int]:
        return [e for e, _ in self.entries]

    @property
    def scores(self) -> list[float]:
        return [s for _, s in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def noisy_or_batch(values: np.ndarray, groups: np.ndarray, n_groups: int) -> np.ndarray:
    """1 - prod(1 - p) per group.

    ``values`` must be sorted by group, descending within each group; the
    product is then accumulated strictly in that order, one rank at a time,
    so the result for a group never depends on what else is in the batch.
    A group with a single value returns that value unchanged. Groups with
    any factor below 1e-12 are combined in log space.
    """
    p = np.minimum(np.asarray(values, dtype=np.float64), _CLAMP)
    groups = np.asarray(groups, dtype=np.int64)
    scores = np.zeros(n_groups, dtype=np.float64)
    if p.size == 0:
        return scores
    counts = np.bincount(groups, minlength=n_groups)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    rank = np.arange(p.size) - starts[groups]
    factors = 1.0 - p
    prod = np.ones(n_groups, dtype=np.float64)
    for j in range(int(counts.max())):
        sel = rank == j
        prod[groups[sel]] *= factors[sel]
    scores = 1.0 - prod
    tiny = np.zeros(n_groups, dtype=bool)
    tiny[groups[factors < _LOG_SPACE_BELOW]] = True
    if tiny.any():
        logs = np.zeros(n_groups, dtype=np.float64)
        lf = np.log(factors)
        for j in range(int(counts.max())):
            sel = (rank == j) & tiny[groups]
            logs[groups[sel]] += lf[sel]
        scores[tiny] = -np.expm1(logs[tiny])
    single = counts == 1
    scores[single] = p[starts[single]]
    return scores


def _noisy_or(confs: list[float]) -> float:
    confs = sorted(confs, reverse=True)
    return float(noisy_or_batch(np.array(confs), np.zeros(len(confs), dtype=np.int64), 1)[0])


def _order(scored: dict[int, float]) -> list[tuple[int, float]]:
    return sorted(scored.items(), key=lambda es: (-es[1], es[0]))


def aggregate_max(pool: CandidatePool) -> CandidateRanking:
    """Rank by best confidence; ties by the rest of the sorted confidence vector, then id."""
    keyed = []
    for e, props in pool.proposals.items():
        confs = sorted((c for _, c in props), reverse=True)
        keyed.append((tuple(-c for c in confs) + (1.0,), e, confs[0]))
    keyed.sort()
    return CandidateRanking(
        pool.task,
        [(e, score) for _, e, score in keyed],
        {e: [r for r, _ in props] for e, props in pool.proposals.items()},
    )


def aggregate_noisy_or(pool: CandidatePool) -> CandidateRanking:
    """Probability that at least one proposing rule is right, assuming independence."""
    scored = {e: _noisy_or([c for _, c in props]) for e, props in pool.proposals.items()}
    return CandidateRanking(
        pool.task, _order(scored),
        {e: [r for r, _ in props] for e, props in pool.proposals.items()},
    )


def aggregate_nr_noisy_or(pool: CandidatePool, assignment: Mapping[int, int]) -> CandidateRanking:
    """Noisy-or over per-cluster maximum confidences.

    ``assignment`` maps rule id to cluster id (e.g. ``ClusterAssignment.labels``).
    """
    scored = {}
    clusters = {}
    for e, props in pool.proposals.items():
        best: dict[int, float] = {}
        for rule_id, conf in props:
            try:
                c = assignment[rule_id]
            except KeyError:
                raise ContractError(f"rule {rule_id} has no cluster assignment") from None
            if conf > best.get(c, -1.0):
                best[c] = conf
        scored[e] = _noisy_or(list(best.values()))
        clusters[e] = sorted(best)
    return CandidateRanking(
        pool.task, _order(scored),
        {e: [r for r, _ in props] for e, props in pool.proposals.items()},
        clusters,
    )
