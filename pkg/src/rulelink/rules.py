"""Horn rules in AnyBURL's text format: parsing, typing, redundancy checks.

A rule line is ``predicted<TAB>correct<TAB>confidence<TAB>rule`` with
``rule = head <= atom1, atom2, ...`` and atoms ``rel(arg,arg)``. Terms that
are a single capital letter, optionally followed by digits, are variables;
everything else is a constant label.

Three rule shapes are supported:

* ``C``   -- ``h(X,Y) <= b1(X,A2), ..., bn(An,Y)``
* ``AC1`` -- ``h(c0,X) <= b1(X,A2), ..., bn(An,c1)``
* ``AC2`` -- ``h(c0,X) <= b1(X,A2), ..., bn(An,A)``

Atoms may use either argument order; the chain is recovered from variable
connectivity.
"""

from __future__ import annotations

import enum
import logging
import re
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field, replace

from .errors import ParseError, UnsupportedRuleError, ValidationError

log = logging.getLogger(__name__)

_VARIABLE = re.compile(r"[A-Z][0-9]*\Z")
_ATOM_SPLIT = re.compile(r"(?<=\))\s*,\s*")
CONFIDENCE_TOL = 1e-9


def is_variable(term: str) -> bool:
    return _VARIABLE.match(term) is not None


class RuleType(str, enum.Enum):
    C = "C"
    AC1 = "AC1"
    AC2 = "AC2"

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class Atom:
    relation: str
    arg1: str
    arg2: str

    @property
    def args(self) -> tuple[str, str]:
        return (self.arg1, self.arg2)

    def __str__(self) -> str:
        return f"{self.relation}({self.arg1},{self.arg2})"


@dataclass(frozen=True)
class Step:
    """One body atom traversed along the chain, from ``source`` to ``target``.

    ``forward`` is true when the atom reads ``relation(source, target)``.
    """
    relation: str
    forward: bool
    source: str
    target: str


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Atom, ...]
    kind: RuleType
    predicted: int = 0
    correct: int = 0
    confidence: float = 0.0
    id: int = 0
    chain: tuple[Step, ...] = field(default=(), compare=False, repr=False)

    @property
    def text(self) -> str:
        return f"{self.head} <= {', '.join(map(str, self.body))}"

    @property
    def relation(self) -> str:
        return self.head.relation

    @property
    def head_constant(self) -> str | None:
        """``c0`` for acyclic rules, ``None`` for cyclic ones."""
        for term in self.head.args:
            if not is_variable(term):
                return term
        return None

    @property
    def constant_position(self) -> int | None:
        """0 if ``c0`` is the head's subject, 1 if its object, None for C rules."""
        for pos, term in enumerate(self.head.args):
            if not is_variable(term):
                return pos
        return None

    @property
    def end_constant(self) -> str | None:
        """``c1`` for AC1 rules."""
        return self.chain[-1].target if self.kind is RuleType.AC1 else None

    def constants(self) -> list[str]:
        terms = [*self.head.args, *(t for atom in self.body for t in atom.args)]
        return list(dict.fromkeys(t for t in terms if not is_variable(t)))

    def __str__(self) -> str:
        return self.text


def parse_atom(text: str) -> Atom:
    text = text.strip()
    lpar = text.find("(")
    if lpar <= 0 or not text.endswith(")"):
        raise ParseError(f"malformed atom {text!r}")
    inner = text[lpar + 1:-1]
    args = inner.split(",")
    if len(args) != 2 or not all(a.strip() for a in args):
        raise ParseError(f"atom {text!r} must have exactly two arguments")
    return Atom(text[:lpar].strip(), args[0].strip(), args[1].strip())


def _trace(start: str, body: tuple[Atom, ...]) -> tuple[Step, ...]:
    """Walk the body from ``start``, consuming each atom exactly once."""
    steps = []
    used = [False] * len(body)
    visited = [start]
    cur = start
    for _ in body:
        hits = [i for i, a in enumerate(body) if not used[i] and cur in a.args]
        if len(hits) != 1:
            raise UnsupportedRuleError(f"body is not a simple chain at term {cur!r}")
        i = hits[0]
        used[i] = True
        atom = body[i]
        if atom.arg1 == atom.arg2:
            raise UnsupportedRuleError(f"self-loop atom {atom}")
        forward = atom.arg1 == cur
        nxt = atom.arg2 if forward else atom.arg1
        if nxt in visited:
            raise UnsupportedRuleError(f"body revisits term {nxt!r}")
        steps.append(Step(atom.relation, forward, cur, nxt))
        visited.append(nxt)
        cur = nxt
    return tuple(steps)


def _analyse(head: Atom, body: tuple[Atom, ...]) -> tuple[RuleType, tuple[Step, ...]]:
    if not body:
        raise UnsupportedRuleError("rules with an empty body are not supported")
    head_vars = [t for t in head.args if is_variable(t)]
    if len(head_vars) == 2:
        if head.arg1 == head.arg2:
            raise UnsupportedRuleError("head with a repeated variable")
        steps = _trace(head.arg1, body)
        if steps[-1].target != head.arg2:
            raise UnsupportedRuleError("cyclic rule whose body does not connect the head variables")
        for s in steps[:-1]:
            if not is_variable(s.target):
                raise UnsupportedRuleError(f"constant {s.target!r} inside a cyclic rule body")
        return RuleType.C, steps
    if len(head_vars) == 1:
        var = head_vars[0]
        steps = _trace(var, body)
        for s in steps[:-1]:
            if not is_variable(s.target):
                raise UnsupportedRuleError(f"constant {s.target!r} in the middle of the body chain")
        end = steps[-1].target
        if not is_variable(end):
            return RuleType.AC1, steps
        if end in head.args:
            raise UnsupportedRuleError("acyclic rule body returns to the head")
        return RuleType.AC2, steps
    raise UnsupportedRuleError("head must contain at least one variable")


def classify(rule_or_head, body: Iterable[Atom] | None = None) -> RuleType:
    """Rule type (C, AC1, AC2) from the chain shape of the body."""
    if isinstance(rule_or_head, Rule):
        head, body = rule_or_head.head, rule_or_head.body
    else:
        head = rule_or_head
    return _analyse(head, tuple(body))[0]


def parse_rule(text: str, predicted: int = 0, correct: int = 0,
               confidence: float = 0.0, rule_id: int = 0) -> Rule:
    """Parse a bare rule string such as ``r(X,Y) <= s(X,A), s(A,Y)``."""
    head_text, sep, body_text = text.partition("<=")
    if not sep:
        raise ParseError(f"missing '<=' in rule {text.strip()!r}")
    head = parse_atom(head_text)
    body_text = body_text.strip()
    body = tuple(parse_atom(a) for a in _ATOM_SPLIT.split(body_text)) if body_text else ()
    kind, chain = _analyse(head, body)
    if not 0.0 <= confidence <= 1.0:
        raise ValidationError(f"confidence {confidence} outside [0, 1]")
    return Rule(head, body, kind, predicted, correct, confidence, rule_id, chain)


def parse_rule_line(line: str, rule_id: int = 0) -> Rule:
    fields = line.rstrip("\r\n").split("\t")
    if len(fields) != 4:
        raise ParseError(f"expected 4 TAB-separated fields, got {len(fields)}")
    try:
        predicted, correct = int(fields[0]), int(fields[1])
        confidence = float(fields[2])
    except ValueError as exc:
        raise ParseError(f"bad rule statistics: {exc}") from None
    if not 0.0 <= confidence <= 1.0:
        raise ValidationError(f"confidence {confidence} outside [0, 1]")
    if predicted < 0 or correct < 0 or correct > predicted:
        raise ValidationError(f"inconsistent counts predicted={predicted} correct={correct}")
    if predicted > 0 and abs(confidence - correct / predicted) > CONFIDENCE_TOL:
        raise ValidationError(
            f"confidence {confidence} != correct/predicted = {correct / predicted}")
    return parse_rule(fields[3], predicted, correct, confidence, rule_id)


def format_rule(rule: Rule) -> str:
    """Inverse of :func:`parse_rule_line`."""
    return f"{rule.predicted}\t{rule.correct}\t{rule.confidence!r}\t{rule.text}"


def canonical_form(rule: Rule) -> tuple:
    """Rule with constants lifted to variables and variables renamed canonically.

    Repeated occurrences of one constant become the same variable. The body
    is ordered along its chain, starting from the head subject when that
    term occurs in the body and from the head object otherwise.
    """
    lifted: dict[str, str] = {}

    def lift(term: str) -> str:
        if is_variable(term):
            return "v:" + term
        return lifted.setdefault(term, f"c:{len(lifted)}")

    head = Atom(rule.head.relation, lift(rule.head.arg1), lift(rule.head.arg2))
    body = tuple(Atom(a.relation, lift(a.arg1), lift(a.arg2)) for a in rule.body)
    body_terms = {t for a in body for t in a.args}
    start = head.arg1 if head.arg1 in body_terms else head.arg2
    ordered, used, cur = [], [False] * len(body), start
    for _ in body:
        i = next(i for i, a in enumerate(body) if not used[i] and cur in a.args)
        used[i] = True
        ordered.append(body[i])
        cur = body[i].arg2 if body[i].arg1 == cur else body[i].arg1

    names: dict[str, int] = {}
    def rename(term: str) -> int:
        return names.setdefault(term, len(names))

    return (
        (head.relation, rename(head.arg1), rename(head.arg2)),
        tuple((a.relation, rename(a.arg1), rename(a.arg2)) for a in ordered),
    )


def directly_redundant(r1: Rule, r2: Rule) -> bool:
    """True iff some constant-to-variable substitutions make both rules equal."""
    return canonical_form(r1) == canonical_form(r2)


class RuleSet:
    """Rules with dense ids, grouped by head relation."""

    def __init__(self, rules: Iterable[Rule], source=None, rejected=()):
        self.rules: list[Rule] = sorted(rules, key=lambda r: r.id)
        ids = [r.id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate rule ids in ruleset")
        self.source = source
        self.rejected: list[tuple[int, str, str]] = list(rejected)
        self.by_relation: dict[str, list[Rule]] = {}
        for rule in self.rules:
            self.by_relation.setdefault(rule.relation, []).append(rule)
        self._by_id = {r.id: r for r in self.rules}

    @classmethod
    def from_strings(cls, lines: Iterable[str]) -> RuleSet:
        """Build from bare rule strings or full rule lines, numbering from 0."""
        rules = []
        for i, line in enumerate(lines):
            if "\t" in line:
                rules.append(parse_rule_line(line, i))
            else:
                rules.append(parse_rule(line, rule_id=i))
        return cls(rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __getitem__(self, rule_id: int) -> Rule:
        return self._by_id[rule_id]

    def for_relation(self, relation: str) -> list[Rule]:
        return self.by_relation.get(relation, [])

    @property
    def relations(self) -> list[str]:
        return list(self.by_relation)


def parse_rules(lines: Iterable[str], vocab=None, source=None) -> RuleSet:
    """Parse rule lines; rules naming labels unknown to ``vocab`` are rejected.

    ``vocab`` is anything with ``entities`` and ``relations`` vocabularies
    (normally a :class:`~rulelink.graph.KnowledgeGraph`). Unsupported rule
    shapes are rejected the same way; syntax errors raise.
    """
    rules: list[Rule] = []
    rejected: list[tuple[int, str, str]] = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rule = parse_rule_line(line, len(rules))
        except UnsupportedRuleError as exc:
            rejected.append((lineno, line.rstrip("\r\n"), str(exc)))
            continue
        except ParseError as exc:
            raise ParseError(str(exc), path=source, line=lineno) from None
        except ValidationError as exc:
            where = f"{source}:{lineno}: " if source is not None else f"line {lineno}: "
            raise ValidationError(where + str(exc)) from None
        if vocab is not None:
            missing = [a.relation for a in (rule.head, *rule.body)
                       if a.relation not in vocab.relations]
            missing += [c for c in rule.constants() if c not in vocab.entities]
            if missing:
                rejected.append((lineno, rule.text, "unknown label(s): " + ", ".join(missing)))
                continue
        rules.append(rule)
    if rejected:
        log.warning("rejected %d rule(s)%s", len(rejected), f" from {source}" if source else "")
    return RuleSet(rules, source=source, rejected=rejected)


def parse_ruleset(path, vocab=None) -> RuleSet:
    with open(path, encoding="utf-8") as fh:
        return parse_rules(fh, vocab=vocab, source=path)


def renumber(rules: Iterable[Rule]) -> list[Rule]:
    return [replace(r, id=i) for i, r in enumerate(rules)]
