"""Glue between the modules: signatures, predictions, cluster files."""

from __future__ import annotations

import logging
from collections.abc import Mapping

import numpy as np

from .aggregation import aggregate_max, aggregate_noisy_or, aggregate_nr_noisy_or
from .clustering import ClusterAssignment
from .errors import ValidationError
from .formats import ClusterSection, PredictionRecord, SignatureRecord
from .graph import KnowledgeGraph
from .inference import CompletionTask, InferenceEngine, compile_rule, solution_set, tasks_from_triples
from .minhash import MinHashParams
from .parallel import parallel_map
from .rules import RuleSet
from .search import DIRECTIONS, SearchResult

log = logging.getLogger(__name__)

METHODS = ("max", "noisy", "nrnoisy")


def compute_signatures(graph: KnowledgeGraph, ruleset: RuleSet, params: MinHashParams,
                       workers: int = 1) -> list[SignatureRecord]:
    """Solution set and MinHash signature of every rule; only the signature is kept."""
    graph.warm()

    def one(rule):
        ss = solution_set(compile_rule(rule, graph), graph, params)
        return SignatureRecord(rule.id, rule.relation, rule.kind.value, ss.size, ss.signature, rule.text)

    return parallel_map(one, list(ruleset), workers)


def assignments_from_sections(sections: list[ClusterSection],
                              ruleset: RuleSet) -> dict[tuple[str, str], ClusterAssignment]:
    """Map each (relation, direction) to a rule-id clustering; every rule must be covered."""
    by_text: dict[str, list[int]] = {}
    for rule in ruleset:
        by_text.setdefault(rule.text, []).append(rule.id)
    out: dict[tuple[str, str], ClusterAssignment] = {}
    for sec in sections:
        labels: dict[int, int] = {}
        for cid, text in sec.clusters:
            for rule_id in by_text.get(text, ()):
                labels[rule_id] = cid
        n = max(labels.values()) + 1 if labels else 0
        dirs = DIRECTIONS if sec.direction == "both" else (sec.direction,)
        for d in dirs:
            out[(sec.relation, d)] = ClusterAssignment(sec.relation, labels, n)
    missing = []
    for rule in ruleset:
        for d in DIRECTIONS:
            a = out.get((rule.relation, d))
            if a is None or rule.id not in a.labels:
                missing.append(f"{d}: {rule.text}")
    if missing:
        listing = "\n  ".join(missing[:20])
        more = f"\n  ... and {len(missing) - 20} more" if len(missing) > 20 else ""
        raise ValidationError(f"{len(missing)} rule/direction pair(s) missing from the cluster file:\n"
                              f"  {listing}{more}")
    return out


def sections_from_search(result: SearchResult, ruleset: RuleSet) -> list[ClusterSection]:
    sections = []
    for (rel, d), unit in sorted(result.units.items()):
        clusters = [(unit.assignment[r.id], r.text)
                    for r in sorted(ruleset.for_relation(rel), key=lambda r: r.id)]
        clusters.sort(key=lambda c: c[0])
        sections.append(ClusterSection(rel, d, unit.thresholds, clusters, unit.fitness))
    return sections


def predict(graph: KnowledgeGraph, ruleset: RuleSet, method: str, topk: int, workers: int = 1,
            assignments: Mapping[tuple[str, str], ClusterAssignment] | None = None,
            engine: InferenceEngine | None = None) -> list[PredictionRecord]:
    """Top-k head and tail rankings for every test triple, in test-split order."""
    if method not in METHODS:
        raise ValueError(f"unknown aggregation method {method!r}")
    engine = engine or InferenceEngine(graph, ruleset)
    graph.warm()
    tasks = tasks_from_triples(graph.test)

    def answer(task: CompletionTask) -> list[tuple[int, float]]:
        if method == "max":
            ranking = aggregate_max(engine.candidates(task, "max", topk))
        elif method == "noisy":
            ranking = aggregate_noisy_or(engine.candidates(task, "all"))
        else:
            pool = engine.candidates(task, "all")
            if not pool.proposals:
                return []
            rel = graph.relations.label(task.relation)
            ranking = aggregate_nr_noisy_or(pool, assignments[(rel, task.predict)].labels)
        return ranking.entries[:topk]

    log.info("answering %d tasks with %s aggregation", len(tasks), method)
    rankings = dict(zip(tasks, parallel_map(answer, tasks, workers)))
    label = graph.entities.label
    records = []
    for h, r, t in graph.test.tolist():
        heads = rankings[CompletionTask(r, t, "head")]
        tails = rankings[CompletionTask(r, h, "tail")]
        records.append(PredictionRecord(
            graph.triple_labels(h, r, t),
            [(label(e), s) for e, s in heads],
            [(label(e), s) for e, s in tails],
        ))
    return records


def signatures_by_id(records: list[SignatureRecord], ruleset: RuleSet) -> dict[int, np.ndarray]:
    """Match persisted signatures to ruleset rules by rule text."""
    by_text = {rec.text: rec.signature for rec in records}
    missing = [r.text for r in ruleset if r.text not in by_text]
    if missing:
        raise ValidationError(f"{len(missing)} rule(s) have no stored signature, e.g. {missing[0]!r}")
    return {r.id: by_text[r.text] for r in ruleset}
