"""Grouping redundant rules by solution-set similarity.

Rules of one head relation form the nodes of a graph whose edge weights
are estimated Jaccard indices. An edge is usable when its weight is
strictly greater than the threshold for the two rule types involved;
clusters are the connected components over usable edges.
"""

from __future__ import annotations

from collections.abc import Mapping, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ContractError
from .minhash import similarity_matrix
from .rules import RuleType

TYPE_ORDER = (RuleType.C, RuleType.AC1, RuleType.AC2)
_TYPE_INDEX = {t: i for i, t in enumerate(TYPE_ORDER)}
THRESHOLD_NAMES = ("C-C", "AC1-AC1", "AC2-AC2", "C-AC1", "C-AC2", "AC1-AC2")
# position in ThresholdSet for each unordered type pair
_PAIR_SLOT = np.array([[0, 3, 4],
                       [3, 1, 5],
                       [4, 5, 2]])


@dataclass(frozen=True)
class ThresholdSet:
    c_c: float = 0.5
    ac1_ac1: float = 0.5
    ac2_ac2: float = 0.5
    c_ac1: float = 0.5
    c_ac2: float = 0.5
    ac1_ac2: float = 0.5

    def __post_init__(self):
        for name, value in zip(THRESHOLD_NAMES, self.values):
            if not 0.0 <= value <= 1.0:
                raise ContractError(f"threshold {name}={value} outside [0, 1]")

    @classmethod
    def uniform(cls, value: float) -> ThresholdSet:
        return cls(*([value] * 6))

    @property
    def values(self) -> tuple[float, ...]:
        return (self.c_c, self.ac1_ac1, self.ac2_ac2, self.c_ac1, self.c_ac2, self.ac1_ac2)

    def between(self, a: RuleType, b: RuleType) -> float:
        return self.values[_PAIR_SLOT[_TYPE_INDEX[a], _TYPE_INDEX[b]]]

    def matrix(self) -> np.ndarray:
        """3x3 symmetric threshold matrix indexed by TYPE_ORDER."""
        return np.asarray(self.values, dtype=np.float64)[_PAIR_SLOT]


@dataclass
class ClusterAssignment:
    relation: str
    labels: dict[int, int]
    n_clusters: int

    def __getitem__(self, rule_id: int) -> int:
        return self.labels[rule_id]

    def members(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.n_clusters)]
        for rule_id in sorted(self.labels):
            out[self.labels[rule_id]].append(rule_id)
        return out

    def partition(self) -> frozenset[frozenset[int]]:
        return frozenset(frozenset(m) for m in self.members())


def type_indices(kinds: Sequence[RuleType]) -> np.ndarray:
    return np.array([_TYPE_INDEX[RuleType(k)] for k in kinds], dtype=np.int64)


def canonical_labels(raw: np.ndarray) -> tuple[np.ndarray, int]:
    """Relabel components densely, ordered by their lowest member index."""
    raw = np.asarray(raw)
    if raw.size == 0:
        return raw.astype(np.int64), 0
    uniq, first = np.unique(raw, return_index=True)
    order = np.argsort(first, kind="stable")
    remap = np.empty(uniq.size, dtype=np.int64)
    remap[order] = np.arange(uniq.size)
    return remap[np.searchsorted(uniq, raw)], int(uniq.size)


def edge_mask(similarity: np.ndarray, types: np.ndarray, thresholds: ThresholdSet) -> np.ndarray:
    t = thresholds.matrix()[types[:, None], types[None, :]]
    mask = similarity > t
    np.fill_diagonal(mask, False)
    return mask


def components_from_similarity(similarity: np.ndarray, types: np.ndarray,
                               thresholds: ThresholdSet) -> tuple[np.ndarray, int]:
    """Canonical component labels of the thresholded similarity graph (vectorised)."""
    n = similarity.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), 0
    mask = edge_mask(similarity, types, thresholds)
    _, raw = connected_components(csr_matrix(mask), directed=False)
    return canonical_labels(raw)


def cluster_rules(rules: Sequence, signatures: Mapping[int, np.ndarray] | Sequence[np.ndarray],
                  thresholds: ThresholdSet, relation: str | None = None) -> ClusterAssignment:
    """Partition one relation's rules by depth-first search over usable edges.

    ``rules`` carry ``id`` and ``kind``; ``signatures`` is keyed by rule id
    or aligned with ``rules``. Cluster ids follow the lowest rule id in
    each cluster, so the result does not depend on input order.
    """
    if isinstance(signatures, Mapping):
        by_id = dict(signatures)
    else:
        if len(signatures) != len(rules):
            raise ContractError("need exactly one signature per rule")
        by_id = {r.id: s for r, s in zip(rules, signatures)}
    rules = sorted(rules, key=lambda r: r.id)
    sigs = [by_id[r.id] for r in rules]
    weights = similarity_matrix(np.vstack(sigs)) if sigs else np.zeros((0, 0))
    return cluster_from_weights(rules, weights, thresholds, relation)


def cluster_from_weights(rules: Sequence, weights: np.ndarray, thresholds: ThresholdSet,
                         relation: str | None = None) -> ClusterAssignment:
    """DFS clustering given the pairwise weight matrix, rows in ascending rule-id order."""
    rules = sorted(rules, key=lambda r: r.id)
    if relation is None and rules:
        relation = rules[0].relation
    n = len(rules)
    label = [-1] * n
    n_clusters = 0
    for root in range(n):
        if label[root] >= 0:
            continue
        label[root] = n_clusters
        stack = [root]
        while stack:
            i = stack.pop()
            for j in range(n):
                if label[j] < 0 and weights[i, j] > thresholds.between(rules[i].kind, rules[j].kind):
                    label[j] = n_clusters
                    stack.append(j)
        n_clusters += 1
    return ClusterAssignment(relation or "", {r.id: label[i] for i, r in enumerate(rules)}, n_clusters)
