"""Rule grounding against the train graph.

All groundings respect Object Identity: distinct variables take distinct
entities, and no variable takes the value of one of the rule's constants.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .errors import ContractError
from .graph import KnowledgeGraph
from .minhash import MinHashParams, minhash_signature
from .rules import Rule, RuleSet, RuleType

Predict = Literal["head", "tail"]
StepSeq = tuple[tuple[int, bool], ...]


@dataclass(frozen=True, order=True)
class CompletionTask:
    """``predict="tail"`` is (entity, relation, ?); ``"head"`` is (?, relation, entity)."""
    relation: int
    entity: int
    predict: Predict

    @property
    def known_position(self) -> int:
        return 0 if self.predict == "tail" else 1


@dataclass(frozen=True)
class RulePlan:
    """A rule compiled to graph ids.

    ``steps`` walk from the head variable (for C rules: the head subject)
    to the end of the body chain.
    """
    rule_id: int
    relation: int
    kind: RuleType
    confidence: float
    steps: StepSeq
    c0: int | None = None
    c0_pos: int | None = None
    c1: int | None = None

    @property
    def blocked(self) -> frozenset[int]:
        return frozenset(c for c in (self.c0, self.c1) if c is not None)


def _reverse(steps: StepSeq) -> StepSeq:
    return tuple((rel, not fwd) for rel, fwd in reversed(steps))


def compile_rule(rule: Rule, graph: KnowledgeGraph) -> RulePlan:
    try:
        rel = graph.relations.id(rule.relation)
        steps = tuple((graph.relations.id(s.relation), s.forward) for s in rule.chain)
        c0 = graph.entities.id(rule.head_constant) if rule.head_constant is not None else None
        c1 = graph.entities.id(rule.end_constant) if rule.end_constant is not None else None
    except KeyError as exc:
        raise ContractError(f"rule {rule.text!r} uses label {exc} unknown to the graph") from None
    return RulePlan(rule.id, rel, rule.kind, rule.confidence, steps, c0, rule.constant_position, c1)


class _Walker:
    """Simple-path enumeration with a per-task prefix memo."""

    def __init__(self, graph: KnowledgeGraph):
        self.graph = graph
        self.memo: dict[tuple[int, StepSeq], list[tuple[int, ...]]] = {}

    def paths(self, start: int, steps: StepSeq) -> list[tuple[int, ...]]:
        """All node sequences following ``steps`` from ``start`` with no repeated node."""
        if not steps:
            return [(start,)]
        key = (start, steps)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        rel, fwd = steps[-1]
        adj = self.graph.adjacency(rel, fwd)
        out = []
        for path in self.paths(start, steps[:-1]):
            for nb in adj.get(path[-1], ()):
                if nb not in path:
                    out.append(path + (nb,))
        self.memo[key] = out
        return out

    def endpoints(self, start: int, steps: StepSeq, blocked: frozenset[int] = frozenset(),
                  first: bool = False) -> set[int]:
        """Ends of simple paths whose non-start nodes avoid ``blocked``.

        The final step is expanded without storing full paths. With
        ``first`` the search stops at the first endpoint found.
        """
        rel, fwd = steps[-1]
        adj = self.graph.adjacency(rel, fwd)
        out: set[int] = set()
        for path in self.paths(start, steps[:-1]):
            if blocked and any(n in blocked for n in path[1:]):
                continue
            for nb in adj.get(path[-1], ()):
                if nb not in path and nb not in blocked:
                    out.add(nb)
                    if first:
                        return out
        return out

    def reaches(self, start: int, steps: StepSeq, target: int, blocked: frozenset[int]) -> bool:
        """Is there a simple path from ``start`` ending exactly at constant ``target``?"""
        rel, fwd = steps[-1]
        adj = self.graph.adjacency(rel, fwd)
        for path in self.paths(start, steps[:-1]):
            if blocked and any(n in blocked for n in path[1:]):
                continue
            if target in adj.get(path[-1], ()):
                return True
        return False


def _variable_values(plan: RulePlan, graph: KnowledgeGraph, walker: _Walker | None = None) -> set[int]:
    """Values of the head variable of an acyclic rule for which the body grounds."""
    walker = walker or _Walker(graph)
    blocked = plan.blocked
    if plan.kind is RuleType.AC1:
        # walk backwards from c1; the start node is the constant itself
        values = walker.endpoints(plan.c1, _reverse(plan.steps), blocked)
        return values
    rel, fwd = plan.steps[0]
    values = set()
    for v in graph.adjacency(rel, fwd):
        if v in blocked:
            continue
        if walker.endpoints(v, plan.steps, blocked, first=True):
            values.add(v)
        walker.memo.clear()
    return values


def _raw_pairs(plan: RulePlan, graph: KnowledgeGraph) -> list[tuple[int, int]]:
    if plan.kind is RuleType.C:
        walker = _Walker(graph)
        rel, fwd = plan.steps[0]
        pairs = []
        for x in graph.adjacency(rel, fwd):
            pairs.extend((x, y) for y in walker.endpoints(x, plan.steps))
            walker.memo.clear()
        return pairs
    values = _variable_values(plan, graph)
    if plan.c0_pos == 0:
        return [(plan.c0, v) for v in values]
    return [(v, plan.c0) for v in values]


@dataclass
class SolutionSet:
    """Head-tail pairs groundable by a rule, coded as ``head * |E| + tail``."""
    rule_id: int
    pairs: np.ndarray
    signature: np.ndarray | None = None

    @property
    def size(self) -> int:
        return int(self.pairs.size)

    def decode(self, num_entities: int) -> set[tuple[int, int]]:
        return {(int(c) // num_entities, int(c) % num_entities) for c in self.pairs}


def solution_set(rule: Rule | RulePlan, graph: KnowledgeGraph,
                 minhash_params: MinHashParams | None = None) -> SolutionSet:
    plan = rule if isinstance(rule, RulePlan) else compile_rule(rule, graph)
    n = graph.num_entities
    pairs = _raw_pairs(plan, graph)
    codes = np.unique(np.fromiter((h * n + t for h, t in pairs), dtype=np.int64, count=len(pairs)))
    sig = minhash_signature(codes, minhash_params) if minhash_params is not None else None
    return SolutionSet(plan.rule_id, codes, sig)


@dataclass
class CandidatePool:
    """Per-entity (rule id, confidence) proposals for one task."""
    task: CompletionTask
    proposals: dict[int, list[tuple[int, float]]] = field(default_factory=dict)

    def add(self, entity: int, rule_id: int, confidence: float) -> None:
        props = self.proposals.setdefault(entity, [])
        if any(r == rule_id for r, _ in props):
            return
        props.append((rule_id, confidence))

    def finalize(self) -> CandidatePool:
        for props in self.proposals.values():
            props.sort(key=lambda rc: (-rc[1], rc[0]))
        return self

    def confidences(self, entity: int) -> list[float]:
        return [c for _, c in self.proposals.get(entity, ())]

    def __len__(self) -> int:
        return len(self.proposals)

    def __contains__(self, entity: int) -> bool:
        return entity in self.proposals


class InferenceEngine:
    """Applies a ruleset to completion tasks on one graph.

    Variable-value sets of acyclic rules (needed when the task entity is
    the rule's head constant) are computed once per rule and cached.
    """

    def __init__(self, graph: KnowledgeGraph, ruleset: RuleSet | Iterable[Rule]):
        self.graph = graph
        rules = list(ruleset)
        self.plans: dict[int, RulePlan] = {r.id: compile_rule(r, graph) for r in rules}
        self._by_relation: dict[int, list[RulePlan]] = {}
        for plan in sorted(self.plans.values(), key=lambda p: (-p.confidence, p.rule_id)):
            self._by_relation.setdefault(plan.relation, []).append(plan)
        # (relation, known position, c0) -> acyclic plans with c0 on the known side
        self._const_side: dict[tuple[int, int, int], list[RulePlan]] = {}
        self._var_side: dict[tuple[int, int], list[RulePlan]] = {}
        for plans in self._by_relation.values():
            for p in plans:
                if p.kind is RuleType.C:
                    for pos in (0, 1):
                        self._var_side.setdefault((p.relation, pos), []).append(p)
                else:
                    self._const_side.setdefault((p.relation, p.c0_pos, p.c0), []).append(p)
                    self._var_side.setdefault((p.relation, 1 - p.c0_pos), []).append(p)
        self._values: dict[int, frozenset[int]] = {}

    def rules_for(self, relation: int) -> list[RulePlan]:
        """Plans for a head relation, by descending confidence."""
        return self._by_relation.get(relation, [])

    def variable_values(self, plan: RulePlan) -> frozenset[int]:
        vals = self._values.get(plan.rule_id)
        if vals is None:
            vals = frozenset(_variable_values(plan, self.graph))
            self._values[plan.rule_id] = vals
        return vals

    def _relevant(self, task: CompletionTask) -> list[RulePlan]:
        pos = task.known_position
        plans = self._var_side.get((task.relation, pos), []) + \
            self._const_side.get((task.relation, pos, task.entity), [])
        plans.sort(key=lambda p: (-p.confidence, p.rule_id))
        return plans

    def _fire(self, plan: RulePlan, task: CompletionTask, walker: _Walker) -> set[int]:
        k = task.entity
        pos = task.known_position
        if plan.kind is RuleType.C:
            steps = plan.steps if pos == 0 else _reverse(plan.steps)
            return walker.endpoints(k, steps)
        if plan.c0_pos == pos:
            return set(self.variable_values(plan)) if k == plan.c0 else set()
        # the known entity binds the head variable; the rule can only propose c0
        blocked = plan.blocked
        if k in blocked:
            return set()
        if plan.kind is RuleType.AC1:
            ok = walker.reaches(k, plan.steps, plan.c1, blocked)
        else:
            ok = bool(walker.endpoints(k, plan.steps, blocked, first=True))
        return {plan.c0} if ok else set()

    def known_answers(self, task: CompletionTask) -> set[int]:
        return self.graph.answers(task.relation, task.entity, task.predict, ("train",))

    def apply(self, rule_id: int, task: CompletionTask, walker: _Walker | None = None) -> set[int]:
        plan = self.plans[rule_id]
        if plan.relation != task.relation:
            raise ContractError(
                f"rule {rule_id} predicts relation {plan.relation}, task asks for {task.relation}")
        cands = self._fire(plan, task, walker or _Walker(self.graph))
        return cands - self.known_answers(task)

    def candidates(self, task: CompletionTask, mode: str = "all", k: int | None = None) -> CandidatePool:
        """Candidate pool for ``task``.

        ``mode="all"`` fires every rule of the relation. ``mode="max"``
        fires rules by descending confidence and stops as soon as the
        top-``k`` of the max-aggregation ranking (including its tie-breaks)
        can no longer change.
        """
        if mode not in ("all", "max"):
            raise ContractError(f"unknown inference mode {mode!r}")
        if mode == "max" and (k is None or k < 1):
            raise ContractError(f"max mode needs k >= 1, got {k}")
        self.graph._check_entity(task.entity)
        pool = CandidatePool(task)
        plans = self._relevant(task)
        if not plans:
            return pool
        walker = _Walker(self.graph)
        known = self.known_answers(task)
        for i, plan in enumerate(plans):
            for e in self._fire(plan, task, walker) - known:
                pool.add(e, plan.rule_id, plan.confidence)
            if mode == "max" and i + 1 < len(plans):
                nxt = plans[i + 1].confidence
                if nxt < plan.confidence and _top_k_settled(pool, nxt, k):
                    break
        return pool.finalize()


def _top_k_settled(pool: CandidatePool, bound: float, k: int) -> bool:
    """Can rules of confidence <= ``bound`` still change the top-k max ranking?

    Confidences above ``bound`` form a fixed prefix of each entity's sorted
    confidence vector; later rules only append values <= ``bound``. Two
    entities whose fixed prefixes differ are ordered for good, so the top-k
    is settled once the k best prefixes are pairwise distinct and strictly
    better than every other prefix (including the empty one).
    """
    if len(pool.proposals) < k:
        return False
    strong = []
    for props in pool.proposals.values():
        fixed = sorted((c for _, c in props if c > bound), reverse=True)
        if fixed:
            strong.append(tuple(-c for c in fixed) + (1.0,))
    if len(strong) < k:
        return False
    strong.sort()
    for a, b in zip(strong[:k], strong[1:k + 1]):
        if a == b:
            return False
    return True


def apply_rule(rule: Rule, task: CompletionTask, graph: KnowledgeGraph) -> set[int]:
    """Entities the rule proposes for ``task``, minus answers already in train."""
    engine = InferenceEngine(graph, [rule])
    return engine.apply(rule.id, task)


def generate_candidates(ruleset: RuleSet | Iterable[Rule], task: CompletionTask,
                        graph: KnowledgeGraph, top_mode: str | tuple = "all") -> CandidatePool:
    """``top_mode`` is ``"all"`` or ``("max", k)``."""
    engine = InferenceEngine(graph, ruleset)
    if isinstance(top_mode, tuple):
        mode, k = top_mode
        return engine.candidates(task, mode, k)
    return engine.candidates(task, top_mode)


def tasks_from_triples(triples: np.ndarray) -> list[CompletionTask]:
    """Unique head and tail prediction tasks for a split, sorted."""
    tasks = set()
    for h, r, t in np.asarray(triples).tolist():
        tasks.add(CompletionTask(r, h, "tail"))
        tasks.add(CompletionTask(r, t, "head"))
    return sorted(tasks)


def tasks_for_relation(tasks: Sequence[CompletionTask], relation: int) -> list[CompletionTask]:
    return [t for t in tasks if t.relation == relation]
