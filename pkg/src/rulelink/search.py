"""Per-(relation, direction) threshold search on the validation split.

Solution-set signatures, the pairwise similarity matrix and the candidate
pools of all validation tasks are computed once; a trial only recomputes
the cluster partition and the clustered noisy-or scores.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .aggregation import DEFAULT_TOPK, aggregate_nr_noisy_or, noisy_or_batch
from .clustering import (ClusterAssignment, ThresholdSet, _PAIR_SLOT, canonical_labels,
                         type_indices)
from .errors import ContractError
from .evaluation import rank_of_correct
from .graph import KnowledgeGraph
from .inference import CandidatePool, CompletionTask, InferenceEngine
from .minhash import similarity_matrix
from .parallel import parallel_map
from .rules import RuleSet

from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

DIRECTIONS = ("head", "tail")
FILTER_SPLITS = ("train", "valid")


@dataclass(frozen=True)
class SearchConfig:
    strategy: str = "random"
    step: float = 0.005
    iterations: int = 10000
    resolution: float = 0.1
    seed: int = 42
    k: int = DEFAULT_TOPK

    def __post_init__(self):
        if self.strategy not in ("grid", "random"):
            raise ContractError(f"unknown search strategy {self.strategy!r}")
        for name in ("step", "resolution"):
            lattice_size(getattr(self, name))
        if self.iterations < 1:
            raise ContractError(f"iterations must be >= 1, got {self.iterations}")
        if self.k < 1:
            raise ContractError(f"fitness cutoff k must be >= 1, got {self.k}")


def lattice_size(step: float) -> int:
    """Number of intervals ``1 / step``; the step must divide 1.0 evenly."""
    if not 0 < step <= 1:
        raise ContractError(f"step must lie in (0, 1], got {step}")
    m = round(1.0 / step)
    if abs(m * step - 1.0) > 1e-9:
        raise ContractError(f"step {step} does not divide 1.0 into an integer count")
    return m


def grid_rows(step: float) -> np.ndarray:
    """Six equal thresholds per row: 0, step, ..., 1."""
    m = lattice_size(step)
    return np.repeat((np.arange(m + 1) / m)[:, None], 6, axis=1)


def random_rows(resolution: float, iterations: int, seed: int) -> np.ndarray:
    """``iterations`` rows of six thresholds drawn uniformly from the lattice."""
    m = lattice_size(resolution)
    rng = np.random.default_rng(seed)
    return rng.integers(0, m + 1, size=(iterations, 6)) / m


@dataclass
class SearchUnit:
    """Everything one (relation, direction) needs to score a partition."""
    relation: str
    relation_id: int
    direction: str
    rule_ids: np.ndarray
    types: np.ndarray
    similarity: np.ndarray
    n_instances: int
    k: int
    prop_group: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    prop_rule: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    prop_conf: np.ndarray = field(default_factory=lambda: np.zeros(0))
    group_instance: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    correct_group: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    def labels(self, row) -> np.ndarray:
        """Canonical cluster labels for one row of six thresholds."""
        n = len(self.rule_ids)
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        thr = np.asarray(row, dtype=np.float64)[_PAIR_SLOT][self.types[:, None], self.types[None, :]]
        mask = self.similarity > thr
        np.fill_diagonal(mask, False)
        _, raw = connected_components(csr_matrix(mask), directed=False)
        return canonical_labels(raw)[0]

    def fitness(self, labels: np.ndarray) -> float:
        """MRR@k over the validation instances under clustered noisy-or."""
        if self.n_instances == 0:
            return 0.0
        if self.prop_group.size == 0:
            return 0.0
        cl = labels[self.prop_rule]
        order = np.lexsort((-self.prop_conf, cl, self.prop_group))
        g, c, p = self.prop_group[order], cl[order], self.prop_conf[order]
        first = np.ones(g.size, dtype=bool)
        first[1:] = (g[1:] != g[:-1]) | (c[1:] != c[:-1])
        gm, pm = g[first], p[first]
        order = np.lexsort((-pm, gm))
        n_groups = self.group_instance.size
        scores = noisy_or_batch(pm[order], gm[order], n_groups)

        has = self.correct_group >= 0
        target = np.full(self.n_instances, np.inf)
        target[has] = scores[self.correct_group[has]]
        is_correct = np.zeros(n_groups, dtype=bool)
        is_correct[self.correct_group[has]] = True
        ahead = (scores >= target[self.group_instance]) & ~is_correct
        rank = np.bincount(self.group_instance, weights=ahead, minlength=self.n_instances) + 1
        rr = np.where(has & (rank <= self.k), 1.0 / rank, 0.0)
        return math.fsum(rr.tolist()) / self.n_instances

    def assignment(self, labels: np.ndarray) -> ClusterAssignment:
        return ClusterAssignment(
            self.relation, {int(r): int(l) for r, l in zip(self.rule_ids, labels)},
            int(labels.max()) + 1 if labels.size else 0)


def validation_instances(graph: KnowledgeGraph, relation: int, direction: str):
    """(task, correct entity) per validation triple of ``relation``."""
    out = []
    for h, r, t in graph.valid.tolist():
        if r != relation:
            continue
        if direction == "tail":
            out.append((CompletionTask(r, h, "tail"), t))
        else:
            out.append((CompletionTask(r, t, "head"), h))
    return out


def build_unit(graph: KnowledgeGraph, ruleset: RuleSet, relation: str, direction: str,
               signatures: dict[int, np.ndarray], pools: dict[CompletionTask, CandidatePool],
               k: int = DEFAULT_TOPK, similarity: np.ndarray | None = None) -> SearchUnit:
    rules = sorted(ruleset.for_relation(relation), key=lambda r: r.id)
    rule_ids = np.array([r.id for r in rules], dtype=np.int64)
    local = {int(r): i for i, r in enumerate(rule_ids)}
    if similarity is None:
        sigs = np.array([signatures[r.id] for r in rules]).reshape(len(rules), -1)
        similarity = similarity_matrix(sigs) if len(rules) else np.zeros((0, 0))
    rel_id = graph.relations.id(relation) if relation in graph.relations else -1
    instances = validation_instances(graph, rel_id, direction) if rel_id >= 0 else []
    unit = SearchUnit(relation, rel_id, direction, rule_ids, type_indices([r.kind for r in rules]),
                      similarity, len(instances), k)
    groups, rules_, confs, group_inst, correct = [], [], [], [], []
    for i, (task, answer) in enumerate(instances):
        pool = pools[task]
        skip = graph.answers(task.relation, task.entity, task.predict, FILTER_SPLITS)
        skip.discard(answer)
        cg = -1
        for e in sorted(pool.proposals):
            if e in skip:
                continue
            gid = len(group_inst)
            group_inst.append(i)
            if e == answer:
                cg = gid
            for rule_id, conf in pool.proposals[e]:
                groups.append(gid)
                rules_.append(local[rule_id])
                confs.append(conf)
        correct.append(cg)
    unit.prop_group = np.array(groups, dtype=np.int64)
    unit.prop_rule = np.array(rules_, dtype=np.int64)
    unit.prop_conf = np.array(confs, dtype=np.float64)
    unit.group_instance = np.array(group_inst, dtype=np.int64)
    unit.correct_group = np.array(correct, dtype=np.int64)
    return unit


@dataclass
class UnitResult:
    relation: str
    direction: str
    thresholds: ThresholdSet
    fitness: float
    assignment: ClusterAssignment
    trial: int | None
    trace: np.ndarray
    default: bool = False


@dataclass
class SearchResult:
    units: dict[tuple[str, str], UnitResult]
    rows: np.ndarray
    config: SearchConfig

    def __getitem__(self, key: tuple[str, str]) -> UnitResult:
        return self.units[key]

    def assignment_for(self, relation: str, direction: str) -> ClusterAssignment:
        return self.units[(relation, direction)].assignment


def search_unit(unit: SearchUnit, rows: np.ndarray) -> UnitResult:
    """Best row for one unit; ties keep the earliest row."""
    if unit.n_instances == 0:
        log.warning("relation %s (%s): no validation triples, using default thresholds",
                    unit.relation, unit.direction)
        ts = ThresholdSet()
        labels = unit.labels(ts.values)
        return UnitResult(unit.relation, unit.direction, ts, 0.0, unit.assignment(labels), None,
                          np.zeros(0), default=True)
    cache: dict[bytes, float] = {}
    trace = np.empty(len(rows))
    best, best_i, best_labels = -1.0, 0, None
    for i, row in enumerate(rows):
        labels = unit.labels(row)
        key = labels.tobytes()
        fit = cache.get(key)
        if fit is None:
            fit = cache[key] = unit.fitness(labels)
        trace[i] = fit
        if fit > best:
            best, best_i, best_labels = fit, i, labels
    ts = ThresholdSet(*(float(v) for v in rows[best_i]))
    return UnitResult(unit.relation, unit.direction, ts, best, unit.assignment(best_labels),
                      best_i, trace)


def run_search(units: list[SearchUnit], rows: np.ndarray, config: SearchConfig,
               workers: int = 1) -> SearchResult:
    results = parallel_map(lambda u: search_unit(u, rows), units, workers)
    return SearchResult({(r.relation, r.direction): r for r in results}, rows, config)


def prepare_units(graph: KnowledgeGraph, ruleset: RuleSet, signatures: dict[int, np.ndarray],
                  k: int = DEFAULT_TOPK, workers: int = 1,
                  engine: InferenceEngine | None = None) -> list[SearchUnit]:
    """Candidate pools for every validation task, then one unit per (relation, direction)."""
    engine = engine or InferenceEngine(graph, ruleset)
    tasks = sorted({task for rel in ruleset.relations if rel in graph.relations
                    for d in DIRECTIONS
                    for task, _ in validation_instances(graph, graph.relations.id(rel), d)})
    graph.warm()
    pools = dict(zip(tasks, parallel_map(lambda t: engine.candidates(t, "all"), tasks, workers)))
    units = []
    for rel in ruleset.relations:
        rules = sorted(ruleset.for_relation(rel), key=lambda r: r.id)
        sigs = np.array([signatures[r.id] for r in rules]).reshape(len(rules), -1)
        sim = similarity_matrix(sigs)
        for d in DIRECTIONS:
            units.append(build_unit(graph, ruleset, rel, d, signatures, pools, k, similarity=sim))
    return units


def grid_search(ruleset: RuleSet, graph: KnowledgeGraph, config: SearchConfig,
                signatures: dict[int, np.ndarray], workers: int = 1,
                units: list[SearchUnit] | None = None) -> SearchResult:
    units = units if units is not None else prepare_units(graph, ruleset, signatures, config.k, workers)
    return run_search(units, grid_rows(config.step), config, workers)


def random_search(ruleset: RuleSet, graph: KnowledgeGraph, config: SearchConfig,
                  signatures: dict[int, np.ndarray], workers: int = 1,
                  units: list[SearchUnit] | None = None) -> SearchResult:
    units = units if units is not None else prepare_units(graph, ruleset, signatures, config.k, workers)
    rows = random_rows(config.resolution, config.iterations, config.seed)
    return run_search(units, rows, config, workers)


def fitness(assignment: ClusterAssignment, ruleset: RuleSet, graph: KnowledgeGraph,
            k: int = DEFAULT_TOPK, direction: str | None = None,
            engine: InferenceEngine | None = None) -> float:
    """Validation MRR@k of one relation under ``assignment``, task by task.

    Straightforward reference path: every validation task is answered with
    :func:`aggregate_nr_noisy_or` and ranked with the BOTTOM rule after
    removing other train/valid answers. ``direction=None`` averages over
    head and tail instances together.
    """
    if k < 1:
        raise ContractError(f"fitness cutoff k must be >= 1, got {k}")
    engine = engine or InferenceEngine(graph, ruleset)
    rel = graph.relations.id(assignment.relation)
    dirs = DIRECTIONS if direction is None else (direction,)
    terms, n = [], 0
    for d in dirs:
        for task, answer in validation_instances(graph, rel, d):
            ranking = aggregate_nr_noisy_or(engine.candidates(task, "all"), assignment.labels)
            skip = graph.answers(task.relation, task.entity, task.predict, FILTER_SPLITS)
            rank = rank_of_correct(ranking.entries, answer, skip)
            n += 1
            if rank is not None and rank <= k:
                terms.append(1.0 / rank)
    return math.fsum(terms) / n if n else 0.0
