"""Filtered Hits@k / MRR under the BOTTOM tie protocol.

A correct answer that shares its score with other candidates is ranked
behind all of them. Every test triple yields two tasks (head and tail
prediction), each counted once.
"""

from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field

from .errors import ValidationError
from .formats import PredictionRecord
from .graph import KnowledgeGraph

DEFAULT_CUTOFFS = (1, 3, 10)


def rank_of_correct(ranking: Sequence[tuple[object, float]], correct, filter_answers=()) -> int | None:
    """BOTTOM rank of ``correct`` in ``ranking``, or None when it is absent.

    Entries in ``filter_answers`` (other true answers) are dropped first.
    The rank is 1 + the number of remaining entries scoring at least as
    high as the correct one.
    """
    filt = set(filter_answers)
    filt.discard(correct)
    target = None
    for ent, score in ranking:
        if ent == correct:
            target = score
            break
    if target is None:
        return None
    better_or_tied = sum(1 for ent, score in ranking
                         if ent != correct and ent not in filt and score >= target)
    return better_or_tied + 1


def optimistic_rank(ranking, correct, filter_answers=()) -> int | None:
    """Best-case tie handling; used only to check that BOTTOM is never kinder."""
    filt = set(filter_answers)
    filt.discard(correct)
    scores = dict(ranking)
    if correct not in scores:
        return None
    target = scores[correct]
    return 1 + sum(1 for ent, s in ranking if ent != correct and ent not in filt and s > target)


@dataclass
class Metrics:
    ranks: list[int | None] = field(default_factory=list)
    cutoffs: tuple[int, ...] = DEFAULT_CUTOFFS

    @property
    def n_tasks(self) -> int:
        return len(self.ranks)

    def hits(self, n: int) -> float:
        if not self.ranks:
            return 0.0
        return sum(1 for r in self.ranks if r is not None and r <= n) / len(self.ranks)

    @property
    def mrr(self) -> float:
        if not self.ranks:
            return 0.0
        return sum(1.0 / r for r in self.ranks if r is not None) / len(self.ranks)


@dataclass
class EvalReport:
    overall: Metrics
    per_relation: dict[str, Metrics]

    @property
    def n_tasks(self) -> int:
        return self.overall.n_tasks

    @property
    def mrr(self) -> float:
        return self.overall.mrr

    def hits(self, n: int) -> float:
        return self.overall.hits(n)

    def as_dict(self) -> dict[str, float]:
        out = {f"hits@{n}": self.hits(n) for n in self.overall.cutoffs}
        out["mrr"] = self.mrr
        out["tasks"] = self.n_tasks
        return out


def evaluate(predictions: Iterable[PredictionRecord], graph: KnowledgeGraph,
             cutoffs: Sequence[int] = DEFAULT_CUTOFFS) -> EvalReport:
    """Score a prediction file against the graph's test split."""
    cutoffs = tuple(sorted(cutoffs))
    by_triple: dict[tuple[str, str, str], PredictionRecord] = {}
    for rec in predictions:
        by_triple[tuple(rec.triple)] = rec
    test = [graph.triple_labels(h, r, t) for h, r, t in graph.test.tolist()]
    unknown = set(by_triple) - set(test)
    if unknown:
        raise ValidationError(f"{len(unknown)} prediction(s) for triples not in the test split, "
                              f"e.g. {sorted(unknown)[0]}")
    missing = [tr for tr in test if tr not in by_triple]
    if missing:
        raise ValidationError(f"no predictions for {len(missing)} test triple(s), e.g. {missing[0]}")

    overall = Metrics(cutoffs=cutoffs)
    per_relation: dict[str, Metrics] = {}
    label = graph.entities.label
    for (h, r, t), (hl, rl, tl) in zip(graph.test.tolist(), test):
        rec = by_triple[(hl, rl, tl)]
        rel_metrics = per_relation.setdefault(rl, Metrics(cutoffs=cutoffs))
        head_filter = {label(e) for e in graph.answers(r, t, "head")}
        tail_filter = {label(e) for e in graph.answers(r, h, "tail")}
        for rank in (rank_of_correct(rec.heads, hl, head_filter),
                     rank_of_correct(rec.tails, tl, tail_filter)):
            overall.ranks.append(rank)
            rel_metrics.ranks.append(rank)
    return EvalReport(overall, dict(sorted(per_relation.items())))


def format_report(report: EvalReport) -> str:
    cutoffs = report.overall.cutoffs
    names = ["relation", "tasks", *(f"hits@{n}" for n in cutoffs), "mrr"]
    rows = []
    for rel, m in [("ALL", report.overall), *report.per_relation.items()]:
        rows.append([rel, str(m.n_tasks), *(f"{m.hits(n):.4f}" for n in cutoffs), f"{m.mrr:.4f}"])
    widths = [max(len(names[i]), *(len(r[i]) for r in rows)) for i in range(len(names))]
    lines = ["  ".join(n.ljust(w) if i == 0 else n.rjust(w) for i, (n, w) in enumerate(zip(names, widths)))]
    for row in rows:
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(row, widths))))
    lines.append("")
    for key, value in report.as_dict().items():
        lines.append(f"{key}={value}" if key == "tasks" else f"{key}={value:.6f}")
    return "\n".join(lines) + "\n"
